#pragma once

#include <string_view>

#include <Eigen/Dense>

#include "gsr/data.hpp"
#include "gsr/linear_model.hpp"

namespace gsr {

enum class InfluenceMethod { exact, hessian_free };

std::string_view to_string(InfluenceMethod method);
InfluenceMethod parse_influence_method(std::string_view text);

// scores(i, g): derivative of target group g's mean risk with respect to the
// weight of held-out sample i.
struct InfluenceTable {
    Eigen::MatrixXd scores;  // n x m
    InfluenceMethod method = InfluenceMethod::exact;
};

enum class SolveStrategy { automatic, direct, iterative };

struct HessianSolveConfig {
    SolveStrategy strategy = SolveStrategy::automatic;
    double residual_tol = 1e-10;   // relative: ||H s - b|| <= tol ||b||
    int max_solve_iters = 10000;   // conjugate-gradient iterations
    Eigen::Index direct_max_dim = 2000;  // automatic picks direct up to this size

    void validate() const;
};

// m x dK, row g = mean unregularized per-sample gradient over target group g.
Eigen::MatrixXd target_group_gradients(const EmbeddingDataset& target,
                                       const ClassifierParams& params);

// Solves H s_g = b_g for every row b_g of `rhs` (m x dK) and returns the s_g as
// rows. Direct: one Cholesky factorization, back-substituted per row, with up
// to two rounds of iterative refinement. Iterative: conjugate gradients.
// Throws NumericalError on factorization failure or when a residual exceeds
// the tolerance.
Eigen::MatrixXd hessian_solve(const Eigen::MatrixXd& h, const Eigen::MatrixXd& rhs,
                              const HessianSolveConfig& cfg = {});

// scores = -(sample_grads) (H^-1 target_grads^T). Lets callers inject any SPD
// matrix for H; with H = I it reduces to the Hessian-free table.
InfluenceTable influence_from_parts(const Eigen::MatrixXd& sample_grads,
                                    const Eigen::MatrixXd& target_grads,
                                    const Eigen::MatrixXd& h,
                                    const HessianSolveConfig& cfg = {});

// Exact table at psi_star, the weighted minimizer on `heldout`. Checks that
// ||weighted_gradient(psi_star)||_inf <= 10 * inner.grad_tol first.
InfluenceTable influence_table(const EmbeddingDataset& heldout, const EmbeddingDataset& target,
                               const ClassifierParams& psi_star, const SampleWeights& w,
                               const InnerSolveConfig& inner,
                               const HessianSolveConfig& solve = {});

// One-step truncated approximation: scores = -(sample_grads)(target_grads^T).
InfluenceTable hessian_free_table(const EmbeddingDataset& heldout,
                                  const EmbeddingDataset& target,
                                  const ClassifierParams& psi_star);

// scores * gamma; gamma must lie on the m-simplex within 1e-9.
Eigen::VectorXd aggregate_influence(const InfluenceTable& table, const Eigen::VectorXd& gamma);

}  // namespace gsr
