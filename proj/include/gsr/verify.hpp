#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gsr/data.hpp"
#include "gsr/linear_model.hpp"

namespace gsr {

// Entry-wise comparison of an analytic quantity against a numeric estimate,
// stored row-major over a rows x cols shape.
//
// Relative error of an entry is |analytic - numeric| / scale with
// scale = max(|numeric|, floor_fraction * max_j |numeric_j|, 1e-300), so
// entries that are tiny compared to the rest of the table are judged against
// the table's magnitude rather than their own.
struct GradCheckReport {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> analytic;
    std::vector<double> numeric;
    std::vector<double> abs_error;
    std::vector<double> rel_error;
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    double floor_fraction = 0.0;
    bool pass = false;

    // Entries whose relative error exceeds the tolerance, as (row, col).
    std::vector<std::pair<std::size_t, std::size_t>> offending() const;
};

GradCheckReport compare(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric,
                        double tolerance, double floor_fraction = 1e-2);

// Tolerance used by the inner solves of the finite-difference oracle.
inline constexpr double oracle_grad_tol = 1e-10;

// Central differences of target group risks through re-solved inner optima:
// entry (i, g) = [R_g(psi*(w + h e_i)) - R_g(psi*(w - h e_i))] / (2h).
// w is perturbed off the simplex on purpose. Requires w_i >= h for all i and
// h in [1e-6, 1e-3]. The 2n solves run as independent parallel tasks.
Eigen::MatrixXd finite_diff_weight_gradient(const EmbeddingDataset& heldout,
                                            const EmbeddingDataset& target,
                                            const SampleWeights& w, const InnerSolveConfig& inner,
                                            double h);

// d(weighted_gradient)/dw_i by differences (central when w_i >= h, forward
// otherwise) against per-sample gradient row i. n x dK entries, compared with
// relative tolerance `tolerance`.
GradCheckReport jacobian_check(const EmbeddingDataset& heldout, const SampleWeights& w,
                               const ClassifierParams& psi, const InnerSolveConfig& inner,
                               double h, double tolerance = 1e-6);

struct SpectralCheck {
    double min_eig = 0.0;
    bool pass = false;
};

// Smallest eigenvalue via a symmetric (self-adjoint) eigensolve; passes when
// lambda > 0 and min_eig >= lambda - 1e-9. Throws ValidationError when H is
// asymmetric beyond 1e-12 relative to its largest entry.
SpectralCheck spectral_check(const Eigen::MatrixXd& h, double lambda);

// Small random problem for the oracles. Features are standard normal with
// column j scaled by anisotropy^(j / (d - 1) - 1/2), so anisotropy > 1 spreads
// the Hessian spectrum. Every target group gets target_per_group rows; held-out
// weights are uniform on [0.5, 1.5] then normalized.
struct OracleInstanceSpec {
    std::size_t n = 5;
    std::size_t dim = 2;
    int num_classes = 2;
    int num_groups = 2;
    std::size_t target_per_group = 3;
    double anisotropy = 1.0;
    std::uint64_t seed = 1;
    void validate() const;
};

struct OracleInstance {
    EmbeddingDataset heldout;
    EmbeddingDataset target;
    SampleWeights w;
};

OracleInstance random_oracle_instance(const OracleInstanceSpec& spec);

// w_i = 1 / (m * |group(i)|), fitted from zero. Uses held-out group labels.
SampleWeights group_balanced_weights(const EmbeddingDataset& heldout);
ClassifierParams group_balanced_baseline(const EmbeddingDataset& heldout,
                                         const InnerSolveConfig& inner);

// Uniform weights fitted from zero.
ClassifierParams erm_baseline(const EmbeddingDataset& heldout, const InnerSolveConfig& inner);

}  // namespace gsr
