#include "gsr/reweight.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gsr/error.hpp"

namespace gsr {

std::string_view to_string(SelectionMetric metric) {
    return metric == SelectionMetric::worst_group_risk ? "worst_group_risk" : "worst_group_error";
}

SelectionMetric parse_selection_metric(std::string_view text) {
    if (text == "worst_group_risk" || text == "risk") return SelectionMetric::worst_group_risk;
    if (text == "worst_group_error" || text == "error") return SelectionMetric::worst_group_error;
    throw ValidationError("unknown selection metric '" + std::string(text) + "'");
}

void OuterConfig::validate() const {
    if (steps < 1) throw ValidationError("steps must be >= 1");
    if (!(outer_lr >= 0.0)) throw ValidationError("outer_lr must be >= 0");
    if (!(temperature > 0.0)) throw ValidationError("temperature must be > 0");
    if (clip_norm && !(*clip_norm > 0.0)) throw ValidationError("clip_norm must be > 0");
    if (!(lr_decay_factor >= 1.0)) throw ValidationError("lr_decay_factor must be >= 1");
    if (lr_decay_every < 1) throw ValidationError("lr_decay_every must be >= 1");
}

double OuterConfig::lr_at(int step) const {
    const int drops = (std::max(step, 1) - 1) / lr_decay_every;
    return outer_lr * std::pow(lr_decay_factor, -static_cast<double>(drops));
}

ReweightState ReweightState::initial(std::size_t n, int num_groups, std::size_t d, int num_classes) {
    if (num_groups < 1) throw ValidationError("at least one target group is required");
    auto psi = ClassifierParams::zeros(d, num_classes);
    return ReweightState{SampleWeights::uniform(n),
                         Eigen::VectorXd::Constant(num_groups, 1.0 / num_groups),
                         psi,
                         1,
                         psi,
                         std::numeric_limits<double>::infinity(),
                         0};
}

Eigen::VectorXd gamma_update(const Eigen::VectorXd& gamma, const Eigen::VectorXd& risks,
                             double temperature) {
    if (!(temperature > 0.0)) throw ValidationError("temperature must be > 0");
    if (gamma.size() != risks.size()) throw ValidationError("gamma and risks differ in length");
    if (!risks.allFinite()) throw NumericalError("non-finite group risk in gamma update");
    const double rmax = risks.maxCoeff();
    Eigen::VectorXd next = gamma.array() * ((risks.array() - rmax) / temperature).exp();
    const double total = next.sum();
    if (!(total > 0.0)) throw NumericalError("gamma update underflowed to zero");
    return next / total;
}

ReweightState outer_step(const ReweightState& state, const InfluenceTable& table,
                         const OuterConfig& cfg, OuterStepInfo* info) {
    if (static_cast<std::size_t>(table.scores.rows()) != state.w.size())
        throw ValidationError("influence table rows do not match the number of weights");
    OuterStepInfo local;
    local.lr = cfg.lr_at(state.step);

    Eigen::VectorXd xi = aggregate_influence(table, state.gamma);
    local.xi_norm = xi.norm();
    if (cfg.clip_norm && local.xi_norm > *cfg.clip_norm) {
        xi *= *cfg.clip_norm / local.xi_norm;
        local.clipped = true;
    }
    Eigen::VectorXd next = (state.w.values() - local.lr * xi).cwiseMax(0.0);

    ReweightState out = state;
    if (next == state.w.values()) {
        // Null step: w kept bit-for-bit.
    } else if (next.sum() > 0.0) {
        out.w = SampleWeights::normalized(std::move(next));
    } else {
        local.rejected = true;
    }
    if (info) *info = local;
    return out;
}

double selection_score(const EmbeddingDataset& validation, const ClassifierParams& psi,
                       SelectionMetric metric) {
    if (metric == SelectionMetric::worst_group_risk) return worst_group_risk(validation, psi).value;
    return 1.0 - worst_group_accuracy(validation, psi).value;
}

ReweightState select_model(const ReweightState& state, const EmbeddingDataset& validation,
                           const OuterConfig& cfg) {
    ReweightState out = state;
    const double score = selection_score(validation, state.psi, cfg.selection);
    if (score <= state.best_score) {
        out.best_score = score;
        out.best_psi = state.psi;
        out.best_step = state.step;
    }
    return out;
}

namespace {

std::array<double, 5> quantiles(std::vector<double> v) {
    std::array<double, 5> out{};
    if (v.empty()) return out;
    std::sort(v.begin(), v.end());
    const double probs[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int q = 0; q < 5; ++q) {
        const double pos = probs[q] * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        out[static_cast<std::size_t>(q)] = v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    }
    return out;
}

void summarize_weights(const EmbeddingDataset& heldout, const SampleWeights& w, StepRecord& row) {
    if (!heldout.has_groups()) return;
    const auto rows = heldout.rows_by_group();
    for (const auto& members : rows) {
        std::vector<double> values;
        values.reserve(members.size());
        double sum = 0.0;
        for (auto i : members) {
            values.push_back(w.values()(static_cast<Eigen::Index>(i)));
            sum += values.back();
        }
        row.group_weight_sums.push_back(sum);
        row.group_weight_quantiles.push_back(quantiles(std::move(values)));
    }
}

}  // namespace

RunRecord gsr_run(const EmbeddingDataset& heldout, const EmbeddingDataset& target,
                  const EmbeddingDataset& validation, const InnerSolveConfig& inner,
                  const OuterConfig& outer, InfluenceMethod method,
                  const HessianSolveConfig& solve) {
    inner.validate();
    outer.validate();
    solve.validate();
    require_groups(target, "target set");
    require_groups(validation, "validation set");
    if (target.dim() != heldout.dim() || validation.dim() != heldout.dim())
        throw ValidationError("held-out, target and validation sets must share the feature dimension");
    if (target.num_classes() != heldout.num_classes() ||
        validation.num_classes() != heldout.num_classes())
        throw ValidationError("held-out, target and validation sets must share the class count");
    if (target.num_groups() != validation.num_groups())
        throw ValidationError("target and validation sets must share the group space");

    auto state = ReweightState::initial(heldout.size(), target.num_groups(), heldout.dim(),
                                        heldout.num_classes());
    RunRecord record;
    record.method = method;

    for (int t = 1; t <= outer.steps; ++t) {
        state.step = t;
        StepRecord row;
        row.step = t;
        summarize_weights(heldout, state.w, row);

        try {
            state.psi = fit_last_layer(heldout, state.w, inner, state.psi);
        } catch (const NumericalError& e) {
            throw NumericalError("inner solve failed at outer step " + std::to_string(t) + ": " +
                                 e.what());
        }

        row.target_group_risks = group_risks(target, state.psi);
        state.gamma = gamma_update(state.gamma, row.target_group_risks, outer.temperature);
        row.gamma = state.gamma;

        const InfluenceTable table =
            method == InfluenceMethod::exact
                ? influence_table(heldout, target, state.psi, state.w, inner, solve)
                : hessian_free_table(heldout, target, state.psi);

        const SampleWeights fitted_with = state.w;
        OuterStepInfo info;
        state = outer_step(state, table, outer, &info);
        row.lr = info.lr;
        row.xi_norm = info.xi_norm;
        row.clipped = info.clipped;
        row.rejected = info.rejected;

        row.val_wg_risk = worst_group_risk(validation, state.psi).value;
        row.val_wg_acc = worst_group_accuracy(validation, state.psi).value;
        state = select_model(state, validation, outer);
        row.selected = state.best_step == t;
        if (row.selected) record.selected_weights = fitted_with.values();
        record.steps.push_back(std::move(row));
    }

    record.selected_step = state.best_step;
    record.selected_score = state.best_score;
    record.selected_psi = state.best_psi;
    record.final_psi = state.psi;
    record.final_weights = state.w.values();
    return record;
}

}  // namespace gsr
