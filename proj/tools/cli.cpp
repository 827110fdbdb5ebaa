#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "CLI11.hpp"
#include "gsr/error.hpp"
#include "gsr/kernels.hpp"
#include "gsr/run_io.hpp"

namespace gsr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void rethrow_in_stage(const Error& e, const std::string& stage) {
    const std::string what = stage + ": " + e.what();
    switch (e.category()) {
        case Error::Category::validation: throw ValidationError(what);
        case Error::Category::numerical: throw NumericalError(what);
        case Error::Category::io: throw IoError(what);
    }
    throw ValidationError(what);
}

template <class F>
auto in_stage(const std::string& stage, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        rethrow_in_stage(e, stage);
    }
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json to_json(const SyntheticSpec& spec) {
    return {{"n_per_group", spec.n_per_group}, {"num_classes", spec.num_classes},
            {"d_core", spec.d_core},           {"d_spurious", spec.d_spurious},
            {"d_noise", spec.d_noise},         {"core_gap", spec.core_gap},
            {"spurious_gap", spec.spurious_gap}, {"noise_std", spec.noise_std},
            {"seed", spec.seed}};
}

json to_json(const SyntheticSuiteSizes& sizes) {
    return {{"train_scale", sizes.train_scale},
            {"labeled_per_group", sizes.labeled_per_group},
            {"test_per_group", sizes.test_per_group}};
}

json metrics(const EmbeddingDataset& ds, const ClassifierParams& psi) {
    const auto wg = worst_group_accuracy(ds, psi);
    return {{"worst_group_accuracy", wg.value},
            {"worst_group", wg.group},
            {"mean_accuracy", mean_accuracy(ds, psi)},
            {"group_accuracies", to_vector(group_accuracies(ds, psi))},
            {"worst_group_risk", worst_group_risk(ds, psi).value}};
}

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string method_label(InfluenceMethod method) {
    return method == InfluenceMethod::exact ? "GSR" : "GSR-HF";
}

std::optional<NoiseSpec> RunConfig::noise_spec() const {
    if (noise_fraction <= 0.0) return std::nullopt;
    return NoiseSpec{noise_fraction, seed + 2};
}

void RunConfig::validate() const {
    if (out.empty()) throw ValidationError("out: output directory is required");
    if (synthetic) {
        synthetic->validate();
        if (!train.empty() || !target.empty() || !validation.empty() || test)
            throw ValidationError("synthetic: data files cannot be combined with --synthetic");
    } else if (train.empty() || target.empty() || validation.empty()) {
        throw ValidationError("train, target and validation files are required without --synthetic");
    }
    split_plan().validate();
    if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0))
        throw ValidationError("noise_fraction must lie in [0, 1]");
    inner.validate();
    outer.validate();
    solve.validate();
}

json to_json(const RunConfig& cfg) {
    json j;
    if (cfg.synthetic) {
        auto spec = *cfg.synthetic;
        spec.seed = cfg.seed;
        j["synthetic"] = to_json(spec);
        j["suite"] = to_json(cfg.suite);
    } else {
        j["train"] = cfg.train.string();
        j["target"] = cfg.target.string();
        j["validation"] = cfg.validation.string();
        j["test"] = cfg.test ? json(cfg.test->string()) : json(nullptr);
    }
    const auto plan = cfg.split_plan();
    j["split"] = {{"heldout_fraction", plan.heldout_fraction},
                  {"seed", plan.seed},
                  {"stratify_by_group", plan.stratify_by_group}};
    if (auto noise = cfg.noise_spec())
        j["noise"] = {{"flip_fraction", noise->flip_fraction}, {"seed", noise->seed}};
    else
        j["noise"] = nullptr;
    j["inner"] = {{"l2_coeff", cfg.inner.l2_coeff}, {"grad_tol", cfg.inner.grad_tol},
                  {"max_iters", cfg.inner.max_iters}, {"memory", cfg.inner.memory},
                  {"wolfe_c1", cfg.inner.wolfe_c1}, {"wolfe_c2", cfg.inner.wolfe_c2}};
    j["outer"] = {{"steps", cfg.outer.steps},
                  {"outer_lr", cfg.outer.outer_lr},
                  {"temperature", cfg.outer.temperature},
                  {"clip_norm", cfg.outer.clip_norm ? json(*cfg.outer.clip_norm) : json(nullptr)},
                  {"lr_decay_factor", cfg.outer.lr_decay_factor},
                  {"lr_decay_every", cfg.outer.lr_decay_every},
                  {"selection", std::string(to_string(cfg.outer.selection))}};
    j["method"] = std::string(to_string(cfg.method));
    const char* strategy = cfg.solve.strategy == SolveStrategy::direct      ? "direct"
                           : cfg.solve.strategy == SolveStrategy::iterative ? "iterative"
                                                                             : "auto";
    j["solve"] = {{"strategy", strategy},
                  {"residual_tol", cfg.solve.residual_tol},
                  {"max_solve_iters", cfg.solve.max_solve_iters},
                  {"direct_max_dim", cfg.solve.direct_max_dim}};
    j["seed"] = cfg.seed;
    j["out"] = cfg.out.string();
    return j;
}

int exit_code(const Error& e) {
    switch (e.category()) {
        case Error::Category::validation: return 1;
        case Error::Category::numerical: return 2;
        case Error::Category::io: return 3;
    }
    return 1;
}

void cmd_synth(const SynthConfig& cfg, std::ostream& log) {
    const auto suite = make_synthetic_suite(cfg.spec, cfg.sizes);
    make_dir(cfg.out);
    const std::pair<const char*, const EmbeddingDataset*> files[] = {
        {"train.csv", &suite.train},
        {"target.csv", &suite.target},
        {"validation.csv", &suite.validation},
        {"test.csv", &suite.test}};
    for (const auto& [name, ds] : files) {
        save_embeddings(*ds, cfg.out / name);
        log << name << ": " << ds->size() << " rows, groups";
        for (auto c : ds->group_counts()) log << ' ' << c;
        log << '\n';
    }
}

void cmd_run(const RunConfig& cfg, std::ostream& log, const std::string& resolved_config) {
    in_stage("config", [&] { cfg.validate(); });
    make_dir(cfg.out);
    const json config = to_json(cfg);
    if (!resolved_config.empty()) write_text(cfg.out / "config.ini", resolved_config);

    struct Inputs {
        EmbeddingDataset train, target, validation;
        std::optional<EmbeddingDataset> test;
    };
    auto inputs = in_stage("load", [&] {
        if (cfg.synthetic) {
            auto spec = *cfg.synthetic;
            spec.seed = cfg.seed;
            auto suite = make_synthetic_suite(spec, cfg.suite);
            return Inputs{std::move(suite.train), std::move(suite.target),
                          std::move(suite.validation), std::move(suite.test)};
        }
        EmbeddingSchema grouped;
        grouped.require_groups = true;
        std::optional<EmbeddingDataset> test;
        if (cfg.test) test = load_embeddings(*cfg.test, grouped);
        return Inputs{load_embeddings(cfg.train), load_embeddings(cfg.target, grouped),
                      load_embeddings(cfg.validation, grouped), std::move(test)};
    });

    auto split = in_stage("split", [&] { return split_holdout(inputs.train, cfg.split_plan()); });
    EmbeddingDataset heldout = split.first;
    std::optional<std::vector<std::size_t>> flipped;
    if (auto noise = cfg.noise_spec()) {
        auto noisy = in_stage("noise", [&] { return inject_label_noise(heldout, *noise); });
        heldout = std::move(noisy.dataset);
        flipped = std::move(noisy.flipped);
    }
    log << "held-out: " << heldout.size() << " rows";
    if (flipped) log << ", " << flipped->size() << " labels flipped";
    log << '\n';

    const auto record = in_stage("run", [&] {
        return gsr_run(heldout, inputs.target, inputs.validation, cfg.inner, cfg.outer, cfg.method,
                       cfg.solve);
    });

    json summary;
    summary["label"] = method_label(cfg.method);
    summary["method"] = std::string(to_string(cfg.method));
    summary["steps"] = record.steps.size();
    summary["selected_step"] = record.selected_step;
    summary["selected_score"] = record.selected_score;
    summary["heldout"] = {{"size", heldout.size()},
                          {"flipped", flipped ? json(flipped->size()) : json(nullptr)}};
    if (heldout.has_groups()) summary["heldout"]["group_counts"] = heldout.group_counts();
    in_stage("evaluate", [&] {
        const auto& eval = inputs.test ? *inputs.test : inputs.validation;
        const char* eval_name = inputs.test ? "test" : "validation";
        summary["evaluation_set"] = eval_name;
        summary["validation"] = metrics(inputs.validation, record.selected_psi);
        summary["selected"] = metrics(eval, record.selected_psi);
        const auto erm = erm_baseline(heldout, cfg.inner);
        summary["baselines"]["erm"] = metrics(eval, erm);
        if (heldout.has_groups()) {
            const auto gb = group_balanced_baseline(heldout, cfg.inner);
            summary["baselines"]["group_balanced"] = metrics(eval, gb);
        }
    });
    summary["config"] = config;

    in_stage("write", [&] {
        write_run_record(record, cfg.out / "records.jsonl",
                         json{{"label", summary["label"]}, {"config", config}});
        std::optional<std::vector<int>> groups;
        if (heldout.has_groups()) groups = heldout.groups();
        write_weights(cfg.out / "final_weights.csv", record.final_weights, groups, flipped);
        write_weights(cfg.out / "selected_weights.csv", record.selected_weights, groups, flipped);
        write_params(cfg.out / "final_psi.csv", record.final_psi);
        write_params(cfg.out / "selected_psi.csv", record.selected_psi);
        auto rows = open_out(cfg.out / "heldout_rows.csv");
        rows << "index,train_row\n";
        for (std::size_t i = 0; i < split.first_rows.size(); ++i)
            rows << i << ',' << split.first_rows[i] << '\n';
        write_text(cfg.out / "summary.json", summary.dump(2) + "\n");
    });

    log << summary["label"].get<std::string>() << ": selected step " << record.selected_step
        << " of " << record.steps.size() << ", " << summary["evaluation_set"].get<std::string>()
        << " worst-group accuracy " << summary["selected"]["worst_group_accuracy"].get<double>()
        << " (ERM " << summary["baselines"]["erm"]["worst_group_accuracy"].get<double>() << ")\n";
}

void cmd_gradcheck(const GradcheckConfig& cfg, std::ostream& log) {
    if (!(cfg.lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
    if (!(cfg.tolerance > 0.0)) throw ValidationError("tolerance must be > 0");
    if (cfg.out.empty()) throw ValidationError("out: report path is required");
    const auto inst = random_oracle_instance(cfg.instance);
    const auto d = inst.heldout.dim();
    const int k = inst.heldout.num_classes();

    json report;
    report["instance"] = {{"n", cfg.instance.n}, {"dim", cfg.instance.dim},
                          {"num_classes", cfg.instance.num_classes},
                          {"num_groups", cfg.instance.num_groups},
                          {"target_per_group", cfg.instance.target_per_group},
                          {"anisotropy", cfg.instance.anisotropy},
                          {"seed", cfg.instance.seed}};
    report["lambda"] = cfg.lambda;
    report["h"] = cfg.h;
    report["tolerance"] = cfg.tolerance;
    report["method"] = std::string(to_string(cfg.method));

    std::vector<std::string> failures;
    if (cfg.lambda == 0.0) {
        // Spectrum only.
        const auto psi = ClassifierParams::zeros(d, k);
        const Eigen::MatrixXd h = kernels::parallel::hessian(inst.heldout.features(), inst.w.values(), psi.psi);
        const auto spec = spectral_check(h, 0.0);
        report["spectral"] = {{"min_eig", spec.min_eig}, {"pass", spec.pass}};
        report["oracle"] = "skipped: lambda = 0";
        report["jacobian"] = "skipped: lambda = 0";
        if (!spec.pass) failures.push_back("spectral");
    } else {
        InnerSolveConfig inner;
        inner.l2_coeff = cfg.lambda;
        inner.grad_tol = oracle_grad_tol;
        const auto psi = fit_last_layer(inst.heldout, inst.w, inner, ClassifierParams::zeros(d, k));
        const auto spec = spectral_check(hessian(inst.heldout, inst.w, psi, inner), cfg.lambda);
        report["spectral"] = {{"min_eig", spec.min_eig}, {"pass", spec.pass}};
        if (!spec.pass) failures.push_back("spectral");

        const Eigen::MatrixXd fd = finite_diff_weight_gradient(inst.heldout, inst.target, inst.w, inner, cfg.h);
        const auto table = cfg.method == InfluenceMethod::exact
                               ? influence_table(inst.heldout, inst.target, psi, inst.w, inner)
                               : hessian_free_table(inst.heldout, inst.target, psi);
        const auto oracle = compare(table.scores, fd, cfg.tolerance);
        report["oracle"] = to_json(oracle);
        if (!oracle.pass) failures.push_back("oracle");

        const auto jac = jacobian_check(inst.heldout, inst.w, psi, inner, cfg.h);
        report["jacobian"] = to_json(jac);
        if (!jac.pass) failures.push_back("jacobian");
        log << "oracle max relative error " << oracle.max_rel_error << " ("
            << to_string(cfg.method) << "), jacobian max relative error " << jac.max_rel_error
            << '\n';
    }
    log << "spectral min eigenvalue " << report["spectral"]["min_eig"].get<double>() << '\n';
    report["pass"] = failures.empty();
    report["failures"] = failures;
    write_text(cfg.out, report.dump(2) + "\n");

    if (!failures.empty()) {
        std::string what = "gradcheck failed:";
        for (const auto& f : failures) what += " " + f;
        throw NumericalError(what);
    }
    log << "gradcheck passed\n";
}

void cmd_report(const ReportConfig& cfg, std::ostream& log) {
    if (cfg.bins < 1) throw ValidationError("bins must be >= 1");
    const auto run = read_run_record(cfg.run_dir / "records.jsonl");
    const auto weights = read_weights(cfg.run_dir / "final_weights.csv");
    const auto out_dir = cfg.out.empty() ? cfg.run_dir / "report" : cfg.out;

    const auto m = run.steps.front()["group_weight_sums"].size();
    if (m == 0) throw ValidationError("run record has no held-out group labels to report on");
    for (const auto& row : weights)
        if (row.group < 0 || static_cast<std::size_t>(row.group) >= m)
            throw ValidationError("final_weights.csv: group id out of range at index " +
                                  std::to_string(row.index));
    make_dir(out_dir);

    auto header = [&](std::ostream& os, const char* first) {
        os << first;
        for (std::size_t g = 0; g < m; ++g) os << ",g" << g;
        os << '\n';
    };
    auto per_step = [&](const char* name, const char* field) {
        auto os = open_out(out_dir / name);
        header(os, "step");
        for (const auto& row : run.steps) {
            const auto& values = row[field];
            if (values.size() != m)
                throw ValidationError(std::string("run record: inconsistent ") + field + " length");
            os << row["step"].get<int>();
            for (const auto& v : values) os << ',' << format_double(v.get<double>());
            os << '\n';
        }
    };
    per_step("weight_sums.csv", "group_weight_sums");
    per_step("gamma.csv", "gamma");

    double max_w = 0.0;
    for (const auto& row : weights) max_w = std::max(max_w, row.weight);
    {
        std::vector<std::vector<std::size_t>> counts(m, std::vector<std::size_t>(cfg.bins, 0));
        for (const auto& row : weights) {
            std::size_t b = 0;
            if (max_w > 0.0)
                b = std::min(cfg.bins - 1, static_cast<std::size_t>(row.weight / max_w * static_cast<double>(cfg.bins)));
            ++counts[static_cast<std::size_t>(row.group)][b];
        }
        auto os = open_out(out_dir / "histograms.csv");
        os << "group,bin,lower,upper,count\n";
        const double width = max_w / static_cast<double>(cfg.bins);
        for (std::size_t g = 0; g < m; ++g)
            for (std::size_t b = 0; b < cfg.bins; ++b)
                os << g << ',' << b << ',' << format_double(width * static_cast<double>(b)) << ','
                   << format_double(b + 1 == cfg.bins ? max_w : width * static_cast<double>(b + 1))
                   << ',' << counts[g][b] << '\n';
    }

    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return weights[a].weight > weights[b].weight; });
    const auto k = std::min(cfg.top_k, weights.size());
    auto ranked = [&](const char* name, auto pick) {
        auto os = open_out(out_dir / name);
        os << "rank,index,group,weight\n";
        for (std::size_t r = 0; r < k; ++r) {
            const auto& row = weights[pick(r)];
            os << r + 1 << ',' << row.index << ',' << row.group << ',' << format_double(row.weight) << '\n';
        }
    };
    ranked("top_k.csv", [&](std::size_t r) { return order[r]; });
    ranked("bottom_k.csv", [&](std::size_t r) { return order[order.size() - 1 - r]; });

    const bool noisy = !weights.empty() && weights.front().flipped.has_value();
    if (noisy) {
        auto os = open_out(out_dir / "noise_summary.csv");
        os << "group,flipped,count,median_weight,mean_weight\n";
        for (std::size_t g = 0; g < m; ++g) {
            for (bool f : {false, true}) {
                std::vector<double> v;
                for (const auto& row : weights)
                    if (static_cast<std::size_t>(row.group) == g && row.flipped.value_or(false) == f)
                        v.push_back(row.weight);
                const double mean = v.empty() ? std::nan("")
                                               : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
                os << g << ',' << (f ? 1 : 0) << ',' << v.size() << ',' << format_double(median(v))
                   << ',' << format_double(mean) << '\n';
            }
        }
    }
    log << "report: " << run.steps.size() << " steps x " << m << " groups -> " << out_dir.string()
        << (noisy ? " (with noise summary)" : "") << '\n';
}

namespace {

void add_spec_options(CLI::App* app, SyntheticSpec& spec, SyntheticSuiteSizes& sizes) {
    app->add_option("--n-per-group", spec.n_per_group, "Group sizes, group = class * A + attribute")
        ->capture_default_str();
    app->add_option("--num-classes", spec.num_classes)->capture_default_str();
    app->add_option("--d-core", spec.d_core)->capture_default_str();
    app->add_option("--d-spurious", spec.d_spurious)->capture_default_str();
    app->add_option("--d-noise", spec.d_noise)->capture_default_str();
    app->add_option("--core-gap", spec.core_gap)->capture_default_str();
    app->add_option("--spurious-gap", spec.spurious_gap)->capture_default_str();
    app->add_option("--noise-std", spec.noise_std)->capture_default_str();
    app->add_option("--train-scale", sizes.train_scale, "Training pool size relative to the group sizes")
        ->capture_default_str();
    app->add_option("--labeled-per-group", sizes.labeled_per_group,
                    "Labeled rows per group, split into target and validation")
        ->capture_default_str();
    app->add_option("--test-per-group", sizes.test_per_group)->capture_default_str();
}

template <class Enum, class Parse>
CLI::Option* add_enum_option(CLI::App* app, const std::string& name, Enum& value, Parse parse,
                             std::string current, const std::string& help) {
    auto* opt = app->add_option_function<std::string>(
        name, [&value, parse](const std::string& text) { value = parse(text); }, help);
    opt->default_str(std::move(current));
    return opt;
}

SolveStrategy parse_strategy(std::string_view text) {
    if (text == "auto") return SolveStrategy::automatic;
    if (text == "direct") return SolveStrategy::direct;
    if (text == "iterative") return SolveStrategy::iterative;
    throw ValidationError("solve: unknown strategy '" + std::string(text) + "'");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Group-robust sample reweighting for last-layer retraining", "gsr"};
    app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
    app.require_subcommand(1);

    SynthConfig synth;
    std::uint64_t synth_seed = synth.spec.seed;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic spurious-feature suite");
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();
    synth_cmd->add_option("--seed", synth_seed)->capture_default_str();
    add_spec_options(synth_cmd, synth.spec, synth.sizes);

    RunConfig run;
    SyntheticSpec run_spec;
    bool synthetic = false;
    bool no_clip = false;
    std::string train, target, validation, test;
    auto* run_cmd = app.add_subcommand("run", "Reweight a held-out split and retrain the last layer");
    run_cmd->add_option("--out", run.out, "Output directory")->required();
    run_cmd->add_flag("--synthetic", synthetic, "Generate the data instead of reading files");
    add_spec_options(run_cmd, run_spec, run.suite);
    run_cmd->add_option("--train", train, "Training embeddings; the held-out split is taken from it");
    run_cmd->add_option("--target", target, "Group-labeled target embeddings");
    run_cmd->add_option("--validation", validation, "Group-labeled validation embeddings");
    run_cmd->add_option("--test", test, "Group-labeled test embeddings (optional)");
    run_cmd->add_option("--seed", run.seed)->capture_default_str();
    run_cmd->add_option("--heldout-fraction", run.heldout_fraction)->capture_default_str();
    run_cmd->add_flag("--stratify-split", run.stratify_split, "Stratify the held-out split by group");
    run_cmd->add_option("--noise-fraction", run.noise_fraction, "Fraction of held-out labels to flip")
        ->capture_default_str();
    run_cmd->add_option("--lambda", run.inner.l2_coeff, "L2 coefficient of the last layer")
        ->capture_default_str();
    run_cmd->add_option("--grad-tol", run.inner.grad_tol)->capture_default_str();
    run_cmd->add_option("--max-iters", run.inner.max_iters)->capture_default_str();
    run_cmd->add_option("--memory", run.inner.memory)->capture_default_str();
    run_cmd->add_option("--steps", run.outer.steps)->capture_default_str();
    run_cmd->add_option("--outer-lr", run.outer.outer_lr)->capture_default_str();
    run_cmd->add_option("--temperature", run.outer.temperature)->capture_default_str();
    double clip = run.outer.clip_norm.value_or(1.0);
    run_cmd->add_option("--clip-norm", clip)->capture_default_str();
    run_cmd->add_flag("--no-clip", no_clip, "Disable clipping of the aggregated gradient");
    run_cmd->add_option("--lr-decay-factor", run.outer.lr_decay_factor)->capture_default_str();
    run_cmd->add_option("--lr-decay-every", run.outer.lr_decay_every)->capture_default_str();
    add_enum_option(run_cmd, "--selection", run.outer.selection, parse_selection_metric,
                    std::string(to_string(run.outer.selection)),
                    "worst_group_risk or worst_group_error");
    add_enum_option(run_cmd, "--method", run.method, parse_influence_method,
                    std::string(to_string(run.method)), "exact or hessian_free");
    add_enum_option(run_cmd, "--solve", run.solve.strategy, parse_strategy, "auto",
                    "auto, direct or iterative");
    run_cmd->add_option("--solve-tol", run.solve.residual_tol)->capture_default_str();

    GradcheckConfig grad;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Check influence scores against finite differences");
    grad_cmd->add_option("--out", grad.out, "Report file (JSON)")->required();
    grad_cmd->add_option("--n", grad.instance.n)->capture_default_str();
    grad_cmd->add_option("--dim", grad.instance.dim)->capture_default_str();
    grad_cmd->add_option("--num-classes", grad.instance.num_classes)->capture_default_str();
    grad_cmd->add_option("--num-groups", grad.instance.num_groups)->capture_default_str();
    grad_cmd->add_option("--target-per-group", grad.instance.target_per_group)->capture_default_str();
    grad_cmd->add_option("--anisotropy", grad.instance.anisotropy)->capture_default_str();
    grad_cmd->add_option("--seed", grad.instance.seed)->capture_default_str();
    grad_cmd->add_option("--lambda", grad.lambda)->capture_default_str();
    grad_cmd->add_option("--fd-step", grad.h, "Finite-difference step h")->capture_default_str();
    grad_cmd->add_option("--tolerance", grad.tolerance, "Max relative error")->capture_default_str();
    add_enum_option(grad_cmd, "--method", grad.method, parse_influence_method,
                    std::string(to_string(grad.method)), "exact or hessian_free");

    ReportConfig report;
    auto* report_cmd = app.add_subcommand("report", "Tabulate weights and gamma from a run directory");
    report_cmd->add_option("--run", report.run_dir, "Run output directory")->required();
    report_cmd->add_option("--out", report.out, "Output directory (default <run>/report)");
    report_cmd->add_option("--top-k", report.top_k)->capture_default_str();
    report_cmd->add_option("--bins", report.bins)->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e);
    }

    try {
        if (synth_cmd->parsed()) {
            synth.spec.seed = synth_seed;
            cmd_synth(synth, out);
        } else if (run_cmd->parsed()) {
            if (synthetic) run.synthetic = run_spec;
            if (!train.empty()) run.train = train;
            if (!target.empty()) run.target = target;
            if (!validation.empty()) run.validation = validation;
            if (!test.empty()) run.test = fs::path(test);
            run.outer.clip_norm = no_clip ? std::nullopt : std::optional<double>(clip);
            cmd_run(run, out, "[run]\n" + run_cmd->config_to_str(true, false));
        } else if (grad_cmd->parsed()) {
            cmd_gradcheck(grad, out);
        } else if (report_cmd->parsed()) {
            cmd_report(report, out);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e);
    } catch (const nlohmann::json::exception& e) {
        err << "error: malformed run record: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace gsr::cli
