#pragma once

#include <array>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gsr/data.hpp"
#include "gsr/influence.hpp"
#include "gsr/linear_model.hpp"

namespace gsr {

enum class SelectionMetric { worst_group_risk, worst_group_error };

std::string_view to_string(SelectionMetric metric);
SelectionMetric parse_selection_metric(std::string_view text);

struct OuterConfig {
    int steps = 100;
    double outer_lr = 1.0;
    double temperature = 0.1;
    std::optional<double> clip_norm = 1.0;
    double lr_decay_factor = 10.0;
    int lr_decay_every = 30;
    SelectionMetric selection = SelectionMetric::worst_group_risk;

    void validate() const;
    // Step-decayed learning rate at 1-based step t:
    // outer_lr * decay^-floor((t - 1) / every).
    double lr_at(int step) const;
};

struct ReweightState {
    SampleWeights w;
    Eigen::VectorXd gamma;
    ClassifierParams psi;
    int step = 1;  // 1-based index of the step being executed
    ClassifierParams best_psi;
    double best_score = std::numeric_limits<double>::infinity();
    int best_step = 0;

    // w = 1/n, gamma = 1/m, psi = 0.
    static ReweightState initial(std::size_t n, int num_groups, std::size_t d, int num_classes);
};

// gamma'_g proportional to gamma_g exp(R_g / tau), computed with the largest
// risk subtracted inside the exponent.
Eigen::VectorXd gamma_update(const Eigen::VectorXd& gamma, const Eigen::VectorXd& risks,
                             double temperature);

struct OuterStepInfo {
    double lr = 0.0;
    double xi_norm = 0.0;  // before clipping
    bool clipped = false;
    bool rejected = false;  // projection produced all zeros; w kept
};

// xi = scores * gamma, clipped to clip_norm in L2, w' = max(w - lr * xi, 0)
// normalized. lr comes from cfg.lr_at(state.step). A step that moves no
// entry returns w bit-for-bit; an all-zero projection leaves w unchanged and
// sets info->rejected.
ReweightState outer_step(const ReweightState& state, const InfluenceTable& table,
                         const OuterConfig& cfg, OuterStepInfo* info = nullptr);

// Score of state.psi on validation per cfg.selection (lower is better).
double selection_score(const EmbeddingDataset& validation, const ClassifierParams& psi,
                       SelectionMetric metric);

// Replaces the incumbent when the current score is <= the incumbent's.
ReweightState select_model(const ReweightState& state, const EmbeddingDataset& validation,
                           const OuterConfig& cfg);

struct StepRecord {
    int step = 0;
    double lr = 0.0;
    Eigen::VectorXd gamma;
    Eigen::VectorXd target_group_risks;
    double val_wg_risk = 0.0;
    double val_wg_acc = 0.0;
    // Held-out weights w^(t) used for this step's fit, summarized per held-out
    // group (empty when the held-out set has no group labels). Quantiles are
    // min, q25, median, q75, max.
    std::vector<double> group_weight_sums;
    std::vector<std::array<double, 5>> group_weight_quantiles;
    double xi_norm = 0.0;
    bool clipped = false;
    bool rejected = false;
    bool selected = false;
};

struct RunRecord {
    InfluenceMethod method = InfluenceMethod::exact;
    std::vector<StepRecord> steps;
    int selected_step = 0;
    double selected_score = 0.0;
    ClassifierParams selected_psi;
    Eigen::VectorXd selected_weights;  // w^(t) at the selected step
    ClassifierParams final_psi;        // psi^(T)
    Eigen::VectorXd final_weights;     // w^(T+1)
};

// Whole outer loop: per step fit (warm-started), gamma update, influence
// table, aggregation + projected step, model selection. Held-out group
// labels, when present, are only used for the weight summaries in the trace.
RunRecord gsr_run(const EmbeddingDataset& heldout, const EmbeddingDataset& target,
                  const EmbeddingDataset& validation, const InnerSolveConfig& inner,
                  const OuterConfig& outer, InfluenceMethod method,
                  const HessianSolveConfig& solve = {});

}  // namespace gsr
