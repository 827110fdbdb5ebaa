#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "gsr/influence.hpp"
#include "gsr/reweight.hpp"
#include "gsr/verify.hpp"

namespace gsr {

// Binary-mode output stream; throws IoError when the file cannot be opened.
std::ofstream open_out(const std::filesystem::path& path);
// Shortest text that reads back to the same double.
std::string format_double(double v);

// One JSON object per outer step with the fields step, gamma,
// target_group_risks, val_wg_risk, val_wg_acc, group_weight_sums, selected
// (plus lr, xi_norm, clipped, rejected, group_weight_quantiles).
nlohmann::json to_json(const StepRecord& row);

// Final line of the JSON-lines trace: {"summary": {...}}.
nlohmann::json summary_json(const RunRecord& record);

// `extra` (an object or null) is merged into the summary line.
void write_run_record(const RunRecord& record, const std::filesystem::path& path,
                      const nlohmann::json& extra = nullptr);

struct ParsedRun {
    std::vector<nlohmann::json> steps;
    nlohmann::json summary;
};

// Throws IoError when missing, ValidationError when a line is not valid JSON
// or the trace has no steps.
ParsedRun read_run_record(const std::filesystem::path& path);

// index,group,weight[,flipped] - group is -1 when unknown.
void write_weights(const std::filesystem::path& path, const Eigen::VectorXd& weights,
                   const std::optional<std::vector<int>>& groups,
                   const std::optional<std::vector<std::size_t>>& flipped = std::nullopt);

struct WeightRow {
    std::size_t index = 0;
    int group = -1;
    double weight = 0.0;
    std::optional<bool> flipped;
};
std::vector<WeightRow> read_weights(const std::filesystem::path& path);

// psi as d rows of K comma-separated values.
void write_params(const std::filesystem::path& path, const ClassifierParams& params);
ClassifierParams read_params(const std::filesystem::path& path);

// Row = held-out sample, column = target group.
void write_influence_table(const std::filesystem::path& path, const InfluenceTable& table);

nlohmann::json to_json(const GradCheckReport& report);

}  // namespace gsr
