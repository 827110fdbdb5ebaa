#include "gsr/linear_model.hpp"

#include <cmath>
#include <sstream>

#include "gsr/error.hpp"
#include "gsr/kernels.hpp"
#include "gsr/lbfgs.hpp"

namespace gsr {

namespace {

void check_params(const EmbeddingDataset& ds, const ClassifierParams& params) {
    if (static_cast<std::size_t>(params.psi.rows()) != ds.dim() ||
        params.psi.cols() != ds.num_classes()) {
        std::ostringstream msg;
        msg << "dimension mismatch: psi is " << params.psi.rows() << "x" << params.psi.cols()
            << ", dataset has d=" << ds.dim() << ", K=" << ds.num_classes();
        throw ValidationError(msg.str());
    }
    if (!params.psi.allFinite()) throw NumericalError("classifier parameters are not finite");
}

void check_weights(const EmbeddingDataset& ds, const SampleWeights& w) {
    if (w.size() != ds.size())
        throw ValidationError("dimension mismatch: " + std::to_string(w.size()) +
                              " weights for " + std::to_string(ds.size()) + " samples");
}

std::vector<std::vector<std::size_t>> nonempty_groups(const EmbeddingDataset& ds) {
    require_groups(ds, "group metrics");
    auto rows = ds.rows_by_group();
    for (std::size_t g = 0; g < rows.size(); ++g)
        if (rows[g].empty()) throw ValidationError("group " + std::to_string(g) + " is empty");
    return rows;
}

}  // namespace

SampleWeights::SampleWeights(Eigen::VectorXd values) : values_(std::move(values)) {
    if (!values_.allFinite()) throw ValidationError("sample weights must be finite");
    if (values_.size() > 0 && values_.minCoeff() < 0.0)
        throw ValidationError("sample weights must be nonnegative");
}

SampleWeights SampleWeights::uniform(std::size_t n) {
    if (n == 0) throw ValidationError("uniform weights need n >= 1");
    return SampleWeights(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n),
                                                   1.0 / static_cast<double>(n)));
}

SampleWeights SampleWeights::normalized(Eigen::VectorXd values) {
    SampleWeights w(std::move(values));
    const double total = w.values_.sum();
    if (!(total > 0.0)) throw ValidationError("cannot normalize weights with zero sum");
    w.values_ /= total;
    return w;
}

bool SampleWeights::is_normalized(double tol) const {
    return std::abs(values_.sum() - 1.0) <= tol;
}

void InnerSolveConfig::validate() const {
    if (!(l2_coeff > 0.0)) throw ValidationError("l2_coeff (lambda) must be > 0");
    if (!(grad_tol > 0.0)) throw ValidationError("grad_tol must be > 0");
    if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
    if (memory < 1) throw ValidationError("memory must be >= 1");
    if (!(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
        throw ValidationError("Wolfe constants must satisfy 0 < c1 < c2 < 1");
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
    if (!logits.allFinite()) throw NumericalError("softmax of non-finite logits");
    const double zmax = logits.maxCoeff();
    Eigen::VectorXd p(logits.size());
    for (Eigen::Index c = 0; c < p.size(); ++c) p(c) = std::exp(logits(c) - zmax);
    return p / p.sum();
}

double weighted_objective(const EmbeddingDataset& ds, const SampleWeights& w,
                          const ClassifierParams& params, const InnerSolveConfig& cfg) {
    check_params(ds, params);
    check_weights(ds, w);
    return kernels::parallel::weighted_loss(ds.features(), ds.labels(), w.values(), params.psi) +
           0.5 * cfg.l2_coeff * params.psi.squaredNorm();
}

Eigen::MatrixXd per_sample_gradients(const EmbeddingDataset& ds, const ClassifierParams& params) {
    check_params(ds, params);
    return kernels::parallel::sample_gradients(ds.features(), ds.labels(), params.psi);
}

Eigen::VectorXd weighted_gradient(const EmbeddingDataset& ds, const SampleWeights& w,
                                  const ClassifierParams& params, const InnerSolveConfig& cfg) {
    check_params(ds, params);
    check_weights(ds, w);
    return kernels::parallel::weighted_gradient(ds.features(), ds.labels(), w.values(),
                                                params.psi) +
           cfg.l2_coeff * params.vec();
}

Eigen::MatrixXd hessian(const EmbeddingDataset& ds, const SampleWeights& w,
                        const ClassifierParams& params, const InnerSolveConfig& cfg) {
    if (!(cfg.l2_coeff > 0.0)) throw ValidationError("hessian requires l2_coeff (lambda) > 0");
    check_params(ds, params);
    check_weights(ds, w);
    Eigen::MatrixXd h = kernels::parallel::hessian(ds.features(), w.values(), params.psi);
    h.diagonal().array() += cfg.l2_coeff;
    return h;
}

ClassifierParams fit_last_layer(const EmbeddingDataset& ds, const SampleWeights& w,
                                const InnerSolveConfig& cfg, const ClassifierParams& init) {
    cfg.validate();
    check_params(ds, init);
    check_weights(ds, w);
    const auto d = init.psi.rows();
    const auto k = init.psi.cols();
    const auto& x = ds.features();
    const auto& y = ds.labels();
    const Eigen::VectorXd& wv = w.values();

    Objective objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
        const Eigen::Map<const Eigen::MatrixXd> psi(v.data(), d, k);
        grad = kernels::parallel::weighted_gradient(x, y, wv, psi) + cfg.l2_coeff * v;
        return kernels::parallel::weighted_loss(x, y, wv, psi) + 0.5 * cfg.l2_coeff * v.squaredNorm();
    };
    LbfgsOptions opts;
    opts.grad_tol = cfg.grad_tol;
    opts.max_iters = cfg.max_iters;
    opts.memory = cfg.memory;
    opts.wolfe_c1 = cfg.wolfe_c1;
    opts.wolfe_c2 = cfg.wolfe_c2;
    auto result = minimize_lbfgs(objective, Eigen::VectorXd(init.vec()), opts);
    return ClassifierParams{Eigen::Map<const Eigen::MatrixXd>(result.x.data(), d, k)};
}

Eigen::VectorXd group_risks(const EmbeddingDataset& ds, const ClassifierParams& params) {
    check_params(ds, params);
    const auto rows = nonempty_groups(ds);
    const Eigen::VectorXd losses =
        kernels::parallel::sample_losses(ds.features(), ds.labels(), params.psi);
    Eigen::VectorXd risks(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t g = 0; g < rows.size(); ++g) {
        double s = 0.0;
        for (auto i : rows[g]) s += losses(static_cast<Eigen::Index>(i));
        risks(static_cast<Eigen::Index>(g)) = s / static_cast<double>(rows[g].size());
    }
    return risks;
}

GroupExtreme worst_group_risk(const EmbeddingDataset& ds, const ClassifierParams& params) {
    const auto risks = group_risks(ds, params);
    GroupExtreme out{risks(0), 0};
    for (Eigen::Index g = 1; g < risks.size(); ++g)
        if (risks(g) > out.value) out = {risks(g), static_cast<int>(g)};
    return out;
}

std::vector<int> predict(const EmbeddingDataset& ds, const ClassifierParams& params) {
    check_params(ds, params);
    const Eigen::MatrixXd logits = ds.features() * params.psi;
    std::vector<int> out(ds.size());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < logits.cols(); ++c)
            if (logits(i, c) > logits(i, best)) best = c;
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

Eigen::VectorXd group_accuracies(const EmbeddingDataset& ds, const ClassifierParams& params) {
    const auto rows = nonempty_groups(ds);
    const auto pred = predict(ds, params);
    Eigen::VectorXd acc(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t g = 0; g < rows.size(); ++g) {
        std::size_t correct = 0;
        for (auto i : rows[g]) correct += pred[i] == ds.labels()[i] ? 1 : 0;
        acc(static_cast<Eigen::Index>(g)) =
            static_cast<double>(correct) / static_cast<double>(rows[g].size());
    }
    return acc;
}

GroupExtreme worst_group_accuracy(const EmbeddingDataset& ds, const ClassifierParams& params) {
    const auto acc = group_accuracies(ds, params);
    GroupExtreme out{acc(0), 0};
    for (Eigen::Index g = 1; g < acc.size(); ++g)
        if (acc(g) < out.value) out = {acc(g), static_cast<int>(g)};
    return out;
}

double mean_accuracy(const EmbeddingDataset& ds, const ClassifierParams& params) {
    const auto pred = predict(ds, params);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == ds.labels()[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace gsr
