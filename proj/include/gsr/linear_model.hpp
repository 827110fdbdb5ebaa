#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "gsr/data.hpp"

namespace gsr {

// Last-layer classifier psi (d x K). vec(psi) stacks the K columns, so the
// coefficient of feature j for class k sits at k * d + j. No implicit bias:
// append a constant feature to get one.
struct ClassifierParams {
    Eigen::MatrixXd psi;

    static ClassifierParams zeros(std::size_t d, int num_classes) {
        return {Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), num_classes)};
    }
    Eigen::Index dim() const { return psi.rows(); }
    int num_classes() const { return static_cast<int>(psi.cols()); }
    Eigen::Map<const Eigen::VectorXd> vec() const { return {psi.data(), psi.size()}; }
};

// Nonnegative per-sample weights. Normalized weights sum to one.
class SampleWeights {
public:
    explicit SampleWeights(Eigen::VectorXd values);

    static SampleWeights uniform(std::size_t n);
    // L1-normalizes a nonnegative vector; throws when the sum is zero.
    static SampleWeights normalized(Eigen::VectorXd values);

    const Eigen::VectorXd& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
    bool is_normalized(double tol = 1e-12) const;

private:
    Eigen::VectorXd values_;
};

struct InnerSolveConfig {
    double l2_coeff = 0.1;  // lambda on ||psi||_F^2 / 2
    double grad_tol = 1e-8;
    int max_iters = 2000;
    int memory = 10;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;

    void validate() const;
};

// Max-subtracted softmax. Throws on non-finite logits.
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

// sum_i w_i CE(softmax(psi^T x_i), y_i) + (lambda / 2) ||psi||_F^2
double weighted_objective(const EmbeddingDataset& ds, const SampleWeights& w,
                          const ClassifierParams& params, const InnerSolveConfig& cfg);

// n x dK, row i = vec(x_i (p_i - u(y_i))^T). Unweighted and unregularized.
Eigen::MatrixXd per_sample_gradients(const EmbeddingDataset& ds, const ClassifierParams& params);

// per_sample_gradients^T w + lambda vec(psi)
Eigen::VectorXd weighted_gradient(const EmbeddingDataset& ds, const SampleWeights& w,
                                  const ClassifierParams& params, const InnerSolveConfig& cfg);

// Exact (dK x dK) Hessian of weighted_objective; block (k, l) is
// sum_i w_i p_ik (delta_kl - p_il) x_i x_i^T, plus lambda I. Requires lambda > 0.
Eigen::MatrixXd hessian(const EmbeddingDataset& ds, const SampleWeights& w,
                        const ClassifierParams& params, const InnerSolveConfig& cfg);

// Minimizer of weighted_objective by L-BFGS from `init`. Throws NumericalError
// on non-convergence or line-search failure.
ClassifierParams fit_last_layer(const EmbeddingDataset& ds, const SampleWeights& w,
                                const InnerSolveConfig& cfg, const ClassifierParams& init);

// Unregularized mean cross-entropy per group. Throws on an empty group.
Eigen::VectorXd group_risks(const EmbeddingDataset& ds, const ClassifierParams& params);

struct GroupExtreme {
    double value = 0.0;
    int group = 0;
};

// Largest group risk; ties go to the smallest group id.
GroupExtreme worst_group_risk(const EmbeddingDataset& ds, const ClassifierParams& params);

// argmax_k (psi^T x)_k with ties to the smallest class id.
std::vector<int> predict(const EmbeddingDataset& ds, const ClassifierParams& params);
Eigen::VectorXd group_accuracies(const EmbeddingDataset& ds, const ClassifierParams& params);
// Smallest group accuracy; ties go to the smallest group id.
GroupExtreme worst_group_accuracy(const EmbeddingDataset& ds, const ClassifierParams& params);
double mean_accuracy(const EmbeddingDataset& ds, const ClassifierParams& params);

}  // namespace gsr
