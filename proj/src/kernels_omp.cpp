#include <cmath>
#include <vector>

#include "gsr/kernels.hpp"

namespace gsr::kernels::parallel {

namespace {

Eigen::Index chunk_count(Eigen::Index n) {
    return (n + reduction_chunk - 1) / reduction_chunk;
}

// In-place stable softmax of one row of logits; returns log-sum-exp.
template <class Row>
double softmax_row(Row&& z) {
    const double zmax = z.maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < z.size(); ++c) total += (z(c) = std::exp(z(c) - zmax));
    z /= total;
    return zmax + std::log(total);
}

}  // namespace

Eigen::MatrixXd probabilities(const FeatureMatrix& x, Params psi) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd p(n, psi.cols());
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::RowVectorXd z = x.row(i) * psi;
        softmax_row(z);
        p.row(i) = z;
    }
    return p;
}

Eigen::VectorXd sample_losses(const FeatureMatrix& x, std::span<const int> y, Params psi) {
    const Eigen::Index n = x.rows();
    Eigen::VectorXd out(n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::RowVectorXd z = x.row(i) * psi;
        const double label_logit = z(y[static_cast<std::size_t>(i)]);
        out(i) = softmax_row(z) - label_logit;
    }
    return out;
}

Eigen::MatrixXd sample_gradients(const FeatureMatrix& x, std::span<const int> y, Params psi) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = psi.rows();
    const Eigen::Index k = psi.cols();
    Eigen::MatrixXd g(n, d * k);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::RowVectorXd z = x.row(i) * psi;
        softmax_row(z);
        z(y[static_cast<std::size_t>(i)]) -= 1.0;
        for (Eigen::Index c = 0; c < k; ++c) g.row(i).segment(c * d, d) = z(c) * x.row(i);
    }
    return g;
}

double weighted_loss(const FeatureMatrix& x, std::span<const int> y, Weights w, Params psi) {
    const Eigen::Index chunks = chunk_count(x.rows());
    std::vector<double> partial(static_cast<std::size_t>(chunks), 0.0);
#pragma omp parallel for schedule(static)
    for (Eigen::Index c = 0; c < chunks; ++c) {
        const Eigen::Index begin = c * reduction_chunk;
        const Eigen::Index end = std::min(begin + reduction_chunk, x.rows());
        double s = 0.0;
        for (Eigen::Index i = begin; i < end; ++i) {
            Eigen::RowVectorXd z = x.row(i) * psi;
            const double label_logit = z(y[static_cast<std::size_t>(i)]);
            s += w(i) * (softmax_row(z) - label_logit);
        }
        partial[static_cast<std::size_t>(c)] = s;
    }
    double total = 0.0;
    for (double s : partial) total += s;
    return total;
}

Eigen::VectorXd weighted_gradient(const FeatureMatrix& x, std::span<const int> y, Weights w,
                                  Params psi) {
    const Eigen::Index d = psi.rows();
    const Eigen::Index k = psi.cols();
    const Eigen::Index chunks = chunk_count(x.rows());
    std::vector<Eigen::MatrixXd> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
    for (Eigen::Index c = 0; c < chunks; ++c) {
        const Eigen::Index begin = c * reduction_chunk;
        const Eigen::Index rows = std::min(begin + reduction_chunk, x.rows()) - begin;
        const auto xc = x.middleRows(begin, rows);
        Eigen::MatrixXd r = xc * psi;
        for (Eigen::Index i = 0; i < rows; ++i) {
            softmax_row(r.row(i));
            r(i, y[static_cast<std::size_t>(begin + i)]) -= 1.0;
            r.row(i) *= w(begin + i);
        }
        partial[static_cast<std::size_t>(c)] = xc.transpose() * r;
    }
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(d, k);
    for (const auto& p : partial) total += p;
    return Eigen::Map<const Eigen::VectorXd>(total.data(), d * k);
}

Eigen::MatrixXd hessian(const FeatureMatrix& x, Weights w, Params psi) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = psi.rows();
    const Eigen::Index k = psi.cols();
    const Eigen::MatrixXd p = probabilities(x, psi);

    // Block (a, b) = X^T diag(w .* p_a .* (delta_ab - p_b)) X. Each task owns
    // one column of one upper block; the lower blocks are mirrored afterwards.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = a; b < k; ++b) pairs.emplace_back(a, b);
    const auto tasks = static_cast<Eigen::Index>(pairs.size()) * d;

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d * k, d * k);
#pragma omp parallel for schedule(static)
    for (Eigen::Index t = 0; t < tasks; ++t) {
        const auto [a, b] = pairs[static_cast<std::size_t>(t / d)];
        const Eigen::Index col = t % d;
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double coef = w(i) * p(i, a) * ((a == b ? 1.0 : 0.0) - p(i, b));
            v(i) = coef * x(i, col);
        }
        h.block(a * d, b * d + col, d, 1).noalias() = x.transpose() * v;
    }
    for (Eigen::Index a = 0; a < k; ++a) {
        auto diag = h.block(a * d, a * d, d, d);
        diag.triangularView<Eigen::StrictlyLower>() = diag.transpose();
        for (Eigen::Index b = a + 1; b < k; ++b)
            h.block(b * d, a * d, d, d) = h.block(a * d, b * d, d, d).transpose();
    }
    return h;
}

}  // namespace gsr::kernels::parallel
