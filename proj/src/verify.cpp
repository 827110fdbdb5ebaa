#include "gsr/verify.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "gsr/error.hpp"
#include "gsr/rng.hpp"

namespace gsr {

std::vector<std::pair<std::size_t, std::size_t>> GradCheckReport::offending() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t e = 0; e < rel_error.size(); ++e)
        if (!(rel_error[e] <= tolerance)) out.emplace_back(e / cols, e % cols);
    return out;
}

GradCheckReport compare(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric,
                        double tolerance, double floor_fraction) {
    if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols())
        throw ValidationError("compare: shape mismatch");
    GradCheckReport r;
    r.rows = static_cast<std::size_t>(analytic.rows());
    r.cols = static_cast<std::size_t>(analytic.cols());
    r.tolerance = tolerance;
    r.floor_fraction = floor_fraction;
    const double table_scale = numeric.size() ? numeric.cwiseAbs().maxCoeff() : 0.0;
    const double floor = std::max(floor_fraction * table_scale, 1e-300);
    for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
        for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
            const double a = analytic(i, j);
            const double b = numeric(i, j);
            const double abs_err = std::abs(a - b);
            const double rel_err = abs_err / std::max(std::abs(b), floor);
            r.analytic.push_back(a);
            r.numeric.push_back(b);
            r.abs_error.push_back(abs_err);
            r.rel_error.push_back(rel_err);
            r.max_abs_error = std::max(r.max_abs_error, abs_err);
            r.max_rel_error = std::max(r.max_rel_error, rel_err);
        }
    }
    r.pass = std::all_of(r.rel_error.begin(), r.rel_error.end(),
                         [&](double e) { return e <= tolerance; });
    return r;
}

Eigen::MatrixXd finite_diff_weight_gradient(const EmbeddingDataset& heldout,
                                            const EmbeddingDataset& target,
                                            const SampleWeights& w, const InnerSolveConfig& inner,
                                            double h) {
    if (!(h >= 1e-6 && h <= 1e-3)) throw ValidationError("finite-difference step must lie in [1e-6, 1e-3]");
    if (w.size() != heldout.size()) throw ValidationError("weights do not match held-out size");
    if (w.values().minCoeff() < h)
        throw ValidationError("central differences need every weight >= h");

    InnerSolveConfig cfg = inner;
    cfg.grad_tol = std::min(cfg.grad_tol, oracle_grad_tol);
    const auto n = static_cast<Eigen::Index>(heldout.size());
    const auto center = fit_last_layer(heldout, w, cfg,
                                       ClassifierParams::zeros(heldout.dim(), heldout.num_classes()));
    const auto m = static_cast<Eigen::Index>(target.num_groups());

    Eigen::MatrixXd plus(n, m), minus(n, m);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index task = 0; task < 2 * n; ++task) {
        try {
            const Eigen::Index i = task / 2;
            const double sign = task % 2 == 0 ? 1.0 : -1.0;
            Eigen::VectorXd wp = w.values();
            wp(i) += sign * h;
            const auto psi = fit_last_layer(heldout, SampleWeights(std::move(wp)), cfg, center);
            const Eigen::VectorXd risks = group_risks(target, psi);
            (sign > 0 ? plus : minus).row(i) = risks.transpose();
        } catch (...) {
#pragma omp critical(gsr_fd_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return (plus - minus) / (2.0 * h);
}

GradCheckReport jacobian_check(const EmbeddingDataset& heldout, const SampleWeights& w,
                               const ClassifierParams& psi, const InnerSolveConfig& inner,
                               double h, double tolerance) {
    if (!(h > 0.0)) throw ValidationError("finite-difference step must be > 0");
    const Eigen::MatrixXd analytic = per_sample_gradients(heldout, psi);
    Eigen::MatrixXd numeric(analytic.rows(), analytic.cols());
    const Eigen::VectorXd base = weighted_gradient(heldout, w, psi, inner);
    for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
        Eigen::VectorXd up = w.values();
        up(i) += h;
        const Eigen::VectorXd g_up = weighted_gradient(heldout, SampleWeights(std::move(up)), psi, inner);
        if (w.values()(i) >= h) {
            Eigen::VectorXd down = w.values();
            down(i) -= h;
            const Eigen::VectorXd g_down =
                weighted_gradient(heldout, SampleWeights(std::move(down)), psi, inner);
            numeric.row(i) = ((g_up - g_down) / (2.0 * h)).transpose();
        } else {
            numeric.row(i) = ((g_up - base) / h).transpose();
        }
    }
    return compare(analytic, numeric, tolerance);
}

SpectralCheck spectral_check(const Eigen::MatrixXd& h, double lambda) {
    if (h.rows() != h.cols() || h.rows() == 0) throw ValidationError("spectral_check needs a square matrix");
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ValidationError("spectral_check: matrix is not symmetric");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw NumericalError("symmetric eigensolve failed");
    const double min_eig = eig.eigenvalues().minCoeff();
    return SpectralCheck{min_eig, lambda > 0.0 && min_eig >= lambda - 1e-9};
}

void OracleInstanceSpec::validate() const {
    if (n < 1) throw ValidationError("oracle instance: n must be >= 1");
    if (dim < 1) throw ValidationError("oracle instance: dim must be >= 1");
    if (num_classes < 2) throw ValidationError("oracle instance: num_classes must be >= 2");
    if (num_groups < 1) throw ValidationError("oracle instance: num_groups must be >= 1");
    if (target_per_group < 1) throw ValidationError("oracle instance: target_per_group must be >= 1");
    if (!(anisotropy >= 1.0) || !std::isfinite(anisotropy))
        throw ValidationError("oracle instance: anisotropy must be finite and >= 1");
}

OracleInstance random_oracle_instance(const OracleInstanceSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const auto d = static_cast<Eigen::Index>(spec.dim);
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(d);
    if (d > 1) {
        for (Eigen::Index j = 0; j < d; ++j)
            scale(j) = std::pow(spec.anisotropy, static_cast<double>(j) / static_cast<double>(d - 1) - 0.5);
    }
    const auto k = static_cast<std::uint64_t>(spec.num_classes);
    const auto m = static_cast<std::uint64_t>(spec.num_groups);
    auto draw = [&](std::size_t rows, auto group_of) {
        FeatureMatrix x(static_cast<Eigen::Index>(rows), d);
        std::vector<int> y(rows), g(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), j) = rng.normal() * scale(j);
            y[i] = static_cast<int>(rng.below(k));
            g[i] = group_of(i);
        }
        return EmbeddingDataset(std::move(x), std::move(y), std::move(g), spec.num_classes,
                                spec.num_groups);
    };
    auto heldout = draw(spec.n, [&](std::size_t) { return static_cast<int>(rng.below(m)); });
    auto target = draw(spec.target_per_group * m, [&](std::size_t i) {
        return static_cast<int>(i / spec.target_per_group);
    });
    Eigen::VectorXd w(static_cast<Eigen::Index>(spec.n));
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = 0.5 + rng.uniform01();
    return {std::move(heldout), std::move(target), SampleWeights::normalized(std::move(w))};
}

SampleWeights group_balanced_weights(const EmbeddingDataset& heldout) {
    require_groups(heldout, "group-balanced baseline");
    const auto counts = heldout.group_counts();
    for (std::size_t g = 0; g < counts.size(); ++g)
        if (counts[g] == 0) throw ValidationError("group " + std::to_string(g) + " is empty");
    const auto m = static_cast<double>(counts.size());
    Eigen::VectorXd w(static_cast<Eigen::Index>(heldout.size()));
    for (std::size_t i = 0; i < heldout.size(); ++i)
        w(static_cast<Eigen::Index>(i)) =
            1.0 / (m * static_cast<double>(counts[static_cast<std::size_t>(heldout.groups()[i])]));
    return SampleWeights::normalized(std::move(w));
}

ClassifierParams group_balanced_baseline(const EmbeddingDataset& heldout,
                                         const InnerSolveConfig& inner) {
    return fit_last_layer(heldout, group_balanced_weights(heldout), inner,
                          ClassifierParams::zeros(heldout.dim(), heldout.num_classes()));
}

ClassifierParams erm_baseline(const EmbeddingDataset& heldout, const InnerSolveConfig& inner) {
    return fit_last_layer(heldout, SampleWeights::uniform(heldout.size()), inner,
                          ClassifierParams::zeros(heldout.dim(), heldout.num_classes()));
}

}  // namespace gsr
