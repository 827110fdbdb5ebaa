#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "gsr/data.hpp"
#include "gsr/error.hpp"
#include "gsr/influence.hpp"
#include "gsr/linear_model.hpp"
#include "gsr/reweight.hpp"
#include "gsr/verify.hpp"

namespace gsr::cli {

struct SynthConfig {
    SyntheticSpec spec;
    SyntheticSuiteSizes sizes;
    std::filesystem::path out;
};

// Everything needed to re-execute a run. Data come either from files or from
// a synthetic suite; `seed` drives the synthetic draw (seed), the held-out
// split (seed + 1) and the label noise (seed + 2).
struct RunConfig {
    std::optional<SyntheticSpec> synthetic;
    SyntheticSuiteSizes suite;
    std::filesystem::path train;
    std::filesystem::path target;
    std::filesystem::path validation;
    std::optional<std::filesystem::path> test;
    double heldout_fraction = 0.1;
    bool stratify_split = false;
    double noise_fraction = 0.0;
    InnerSolveConfig inner;
    OuterConfig outer;
    InfluenceMethod method = InfluenceMethod::exact;
    HessianSolveConfig solve;
    std::uint64_t seed = 1;
    std::filesystem::path out;

    SplitPlan split_plan() const { return {heldout_fraction, seed + 1, stratify_split}; }
    std::optional<NoiseSpec> noise_spec() const;
    void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);

struct GradcheckConfig {
    OracleInstanceSpec instance;
    double lambda = 0.1;
    double h = 1e-4;
    double tolerance = 1e-3;
    InfluenceMethod method = InfluenceMethod::exact;
    std::filesystem::path out;
};

struct ReportConfig {
    std::filesystem::path run_dir;
    std::filesystem::path out;  // defaults to <run_dir>/report
    std::size_t top_k = 20;
    std::size_t bins = 50;
};

// "GSR" or "GSR-HF".
std::string method_label(InfluenceMethod method);

void cmd_synth(const SynthConfig& cfg, std::ostream& log);
void cmd_run(const RunConfig& cfg, std::ostream& log, const std::string& resolved_config = {});
// Writes the JSON report, then throws NumericalError if any check failed.
void cmd_gradcheck(const GradcheckConfig& cfg, std::ostream& log);
void cmd_report(const ReportConfig& cfg, std::ostream& log);

// 0 ok, 1 validation, 2 numerical, 3 I/O.
int exit_code(const Error& e);

// Parses `args` (without the program name) and runs the chosen subcommand.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gsr::cli
