#pragma once

#include <span>

#include <Eigen/Dense>

#include "gsr/data.hpp"

// Hot loops of the weighted multinomial-logistic objective.
//
// Layout: the classifier psi is d x K (column-major), and vec(psi) stacks its
// columns, so entry (j, k) lives at index k * d + j. Gradient rows and Hessian
// blocks follow the same class-major order.
//
// `serial` is the plain per-sample reference kept for testing. `parallel` is
// the OpenMP implementation used by the library. Every parallel kernel either
// assigns each output element to exactly one thread with a fixed summation
// order, or reduces fixed-size row chunks serially, so its result does not
// depend on the thread count.
namespace gsr::kernels {

using Weights = Eigen::Ref<const Eigen::VectorXd>;
using Params = Eigen::Ref<const Eigen::MatrixXd>;

namespace serial {

// n x K softmax probabilities.
Eigen::MatrixXd probabilities(const FeatureMatrix& x, Params psi);
// Unweighted cross-entropy per sample.
Eigen::VectorXd sample_losses(const FeatureMatrix& x, std::span<const int> y, Params psi);
// n x dK; row i = vec(x_i (p_i - u(y_i))^T).
Eigen::MatrixXd sample_gradients(const FeatureMatrix& x, std::span<const int> y, Params psi);
double weighted_loss(const FeatureMatrix& x, std::span<const int> y, Weights w, Params psi);
// sum_i w_i * sample_gradient_i, as a dK vector.
Eigen::VectorXd weighted_gradient(const FeatureMatrix& x, std::span<const int> y, Weights w,
                                  Params psi);
// sum_i w_i (diag(p_i) - p_i p_i^T) kron x_i x_i^T, no regularizer.
Eigen::MatrixXd hessian(const FeatureMatrix& x, Weights w, Params psi);

}  // namespace serial

namespace parallel {

Eigen::MatrixXd probabilities(const FeatureMatrix& x, Params psi);
Eigen::VectorXd sample_losses(const FeatureMatrix& x, std::span<const int> y, Params psi);
Eigen::MatrixXd sample_gradients(const FeatureMatrix& x, std::span<const int> y, Params psi);
double weighted_loss(const FeatureMatrix& x, std::span<const int> y, Weights w, Params psi);
Eigen::VectorXd weighted_gradient(const FeatureMatrix& x, std::span<const int> y, Weights w,
                                  Params psi);
Eigen::MatrixXd hessian(const FeatureMatrix& x, Weights w, Params psi);

// Rows per chunk in chunked reductions. Fixed, so partial sums never depend on
// the number of threads.
inline constexpr Eigen::Index reduction_chunk = 256;

}  // namespace parallel

}  // namespace gsr::kernels
