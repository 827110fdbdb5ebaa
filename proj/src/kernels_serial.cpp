#include <algorithm>
#include <cmath>

#include "gsr/kernels.hpp"

namespace gsr::kernels::serial {

namespace {

// Softmax of logits z_k = sum_j x_j psi(j, k) for one sample.
Eigen::VectorXd row_probabilities(const FeatureMatrix& x, Eigen::Index i, Params psi) {
    const auto d = psi.rows();
    const auto k = psi.cols();
    Eigen::VectorXd z(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) s += x(i, j) * psi(j, c);
        z(c) = s;
    }
    const double zmax = z.maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
        z(c) = std::exp(z(c) - zmax);
        total += z(c);
    }
    return z / total;
}

double row_loss(const FeatureMatrix& x, Eigen::Index i, int label, Params psi) {
    const auto d = psi.rows();
    const auto k = psi.cols();
    Eigen::VectorXd z(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) s += x(i, j) * psi(j, c);
        z(c) = s;
    }
    const double zmax = z.maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) total += std::exp(z(c) - zmax);
    return zmax + std::log(total) - z(label);
}

}  // namespace

Eigen::MatrixXd probabilities(const FeatureMatrix& x, Params psi) {
    Eigen::MatrixXd p(x.rows(), psi.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) p.row(i) = row_probabilities(x, i, psi).transpose();
    return p;
}

Eigen::VectorXd sample_losses(const FeatureMatrix& x, std::span<const int> y, Params psi) {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        out(i) = row_loss(x, i, y[static_cast<std::size_t>(i)], psi);
    return out;
}

Eigen::MatrixXd sample_gradients(const FeatureMatrix& x, std::span<const int> y, Params psi) {
    const auto d = psi.rows();
    const auto k = psi.cols();
    Eigen::MatrixXd g(x.rows(), d * k);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto p = row_probabilities(x, i, psi);
        for (Eigen::Index c = 0; c < k; ++c) {
            const double r = p(c) - (c == y[static_cast<std::size_t>(i)] ? 1.0 : 0.0);
            for (Eigen::Index j = 0; j < d; ++j) g(i, c * d + j) = x(i, j) * r;
        }
    }
    return g;
}

double weighted_loss(const FeatureMatrix& x, std::span<const int> y, Weights w, Params psi) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        total += w(i) * row_loss(x, i, y[static_cast<std::size_t>(i)], psi);
    return total;
}

Eigen::VectorXd weighted_gradient(const FeatureMatrix& x, std::span<const int> y, Weights w,
                                  Params psi) {
    const auto d = psi.rows();
    const auto k = psi.cols();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d * k);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto p = row_probabilities(x, i, psi);
        for (Eigen::Index c = 0; c < k; ++c) {
            const double r = w(i) * (p(c) - (c == y[static_cast<std::size_t>(i)] ? 1.0 : 0.0));
            for (Eigen::Index j = 0; j < d; ++j) g(c * d + j) += x(i, j) * r;
        }
    }
    return g;
}

Eigen::MatrixXd hessian(const FeatureMatrix& x, Weights w, Params psi) {
    const auto d = psi.rows();
    const auto k = psi.cols();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d * k, d * k);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto p = row_probabilities(x, i, psi);
        for (Eigen::Index a = 0; a < k; ++a) {
            for (Eigen::Index b = 0; b < k; ++b) {
                const double s = w(i) * p(a) * ((a == b ? 1.0 : 0.0) - p(b));
                for (Eigen::Index r = 0; r < d; ++r)
                    for (Eigen::Index c = 0; c < d; ++c)
                        h(a * d + r, b * d + c) += s * x(i, r) * x(i, c);
            }
        }
    }
    return h;
}

}  // namespace gsr::kernels::serial
