// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "gsr/data.hpp"
#include "gsr/influence.hpp"
#include "gsr/linear_model.hpp"
#include "gsr/reweight.hpp"
#include "gsr/rng.hpp"
#include "gsr/verify.hpp"

using namespace gsr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(const char* id, bool pass, const std::string& detail) {
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

InnerSolveConfig tight(double lambda) {
    InnerSolveConfig cfg;
    cfg.l2_coeff = lambda;
    cfg.grad_tol = oracle_grad_tol;
    return cfg;
}

double oracle_error(const OracleInstance& inst, const InnerSolveConfig& cfg, InfluenceMethod method,
                    const Eigen::MatrixXd& fd) {
    const auto psi = fit_last_layer(inst.heldout, inst.w, cfg,
                                    ClassifierParams::zeros(inst.heldout.dim(), inst.heldout.num_classes()));
    const auto table = method == InfluenceMethod::exact ? influence_table(inst.heldout, inst.target, psi, inst.w, cfg)
                                                        : hessian_free_table(inst.heldout, inst.target, psi);
    return compare(table.scores, fd, 1e-3).max_rel_error;
}

void ac1() {
    const auto t0 = Clock::now();
    Rng rng(2024);
    const double lambdas[] = {0.05, 0.1, 1.0};
    const int groups[] = {2, 4};
    double worst = 0.0;
    int passed = 0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
        OracleInstanceSpec spec;
        spec.n = 2 + rng.below(19);
        spec.dim = 1 + rng.below(4);
        spec.num_classes = 2 + static_cast<int>(rng.below(2));
        spec.num_groups = groups[rng.below(2)];
        spec.target_per_group = 2 + rng.below(3);
        spec.seed = rng.next_u64();
        const double lambda = lambdas[t % 3];
        const auto inst = random_oracle_instance(spec);
        const auto cfg = tight(lambda);
        const auto fd = finite_diff_weight_gradient(inst.heldout, inst.target, inst.w, cfg, 1e-4);
        const double err = oracle_error(inst, cfg, InfluenceMethod::exact, fd);
        worst = std::max(worst, err);
        if (err <= 1e-3) ++passed;
    }
    const double secs = seconds_since(t0);
    verdict("AC1", passed == trials && secs <= 120.0,
            fmt("exact table vs retraining oracle, %d/%d instances within 1e-3, max rel err %.3g, %.1f s",
                passed, trials, worst, secs));
}

void ac2() {
    const auto inst = random_oracle_instance({10, 3, 2, 2, 5, 100.0, 3});
    const auto cfg = tight(0.1);
    const auto fd = finite_diff_weight_gradient(inst.heldout, inst.target, inst.w, cfg, 1e-4);
    const double hf = oracle_error(inst, cfg, InfluenceMethod::hessian_free, fd);
    const double ex = oracle_error(inst, cfg, InfluenceMethod::exact, fd);
    verdict("AC2", hf > 0.1 && ex <= 1e-3,
            fmt("anisotropy 100 instance, Hessian-free rel err %.3g (> 0.1), exact %.3g (<= 1e-3)", hf, ex));
}

void ac3() {
    Rng rng(77);
    const double lambdas[] = {1e-3, 0.1, 1.0};
    int passed = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 100; ++t) {
        const double lambda = lambdas[t % 3];
        const auto inst = random_oracle_instance({1 + rng.below(30), 1 + rng.below(6), 2 + static_cast<int>(rng.below(3)),
                                                  2, 1, 1.0 + 99.0 * rng.uniform01(), rng.next_u64()});
        auto psi = ClassifierParams::zeros(inst.heldout.dim(), inst.heldout.num_classes());
        for (Eigen::Index i = 0; i < psi.psi.size(); ++i) psi.psi.data()[i] = 3.0 * rng.normal();
        const auto check = spectral_check(hessian(inst.heldout, inst.w, psi, tight(lambda)), lambda);
        worst_margin = std::min(worst_margin, check.min_eig - lambda);
        if (check.pass) ++passed;
    }
    verdict("AC3", passed == 100,
            fmt("%d/100 Hessians with min eigenvalue >= lambda - 1e-9, worst (min_eig - lambda) %.3g", passed,
                worst_margin));
}

void ac4() {
    Rng rng(99);
    double grad_err = 0.0, hess_err = 0.0, jac_err = 0.0, psd_min = 0.0;
    for (int t = 0; t < 40; ++t) {
        const auto inst = random_oracle_instance({2 + rng.below(20), 1 + rng.below(4), 2 + static_cast<int>(rng.below(3)),
                                                  2, 1, 1.0, rng.next_u64()});
        const auto cfg = tight(0.1);
        auto psi = ClassifierParams::zeros(inst.heldout.dim(), inst.heldout.num_classes());
        for (Eigen::Index i = 0; i < psi.psi.size(); ++i) psi.psi.data()[i] = rng.normal();
        const auto p = psi.psi.size();
        const Eigen::VectorXd g = weighted_gradient(inst.heldout, inst.w, psi, cfg);
        const Eigen::MatrixXd h = hessian(inst.heldout, inst.w, psi, cfg);
        Eigen::VectorXd g_fd(p);
        Eigen::MatrixXd h_fd(p, p);
        const double step = 1e-5;
        for (Eigen::Index j = 0; j < p; ++j) {
            auto up = psi, down = psi;
            up.psi.data()[j] += step;
            down.psi.data()[j] -= step;
            g_fd(j) = (weighted_objective(inst.heldout, inst.w, up, cfg) -
                       weighted_objective(inst.heldout, inst.w, down, cfg)) / (2 * step);
            h_fd.col(j) = (weighted_gradient(inst.heldout, inst.w, up, cfg) -
                           weighted_gradient(inst.heldout, inst.w, down, cfg)) / (2 * step);
        }
        grad_err = std::max(grad_err, compare(g, g_fd, 1e-5).max_rel_error);
        hess_err = std::max(hess_err, compare(h, h_fd, 1e-4).max_rel_error);
        jac_err = std::max(jac_err, jacobian_check(inst.heldout, inst.w, psi, cfg, 1e-5, 1e-9).max_rel_error);

        Eigen::VectorXd logits(inst.heldout.num_classes());
        for (Eigen::Index k = 0; k < logits.size(); ++k) logits(k) = 5.0 * rng.normal();
        const Eigen::VectorXd s = softmax(logits);
        const Eigen::MatrixXd jac = Eigen::MatrixXd(s.asDiagonal()) - s * s.transpose();
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
        psd_min = std::min(psd_min, eig.eigenvalues().minCoeff());
    }
    const bool pass = grad_err <= 1e-5 && hess_err <= 1e-4 && jac_err <= 1e-9 && psd_min >= -1e-12;
    verdict("AC4", pass,
            fmt("gradient rel err %.3g (<= 1e-5), Hessian %.3g (<= 1e-4), weight Jacobian %.3g (<= 1e-9), "
                "softmax derivative min eigenvalue %.3g",
                grad_err, hess_err, jac_err, psd_min));
}

struct SeedRun {
    double gsr_wga = 0.0, erm_wga = 0.0, gb_wga = 0.0;
    double minority_initial = 0.0, minority_selected = 0.0;
    double noisy_wga = 0.0;
    double flipped_minority_median = 0.0, clean_minority_median = 0.0;
};

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

OuterConfig synthetic_outer() {
    OuterConfig outer;
    outer.outer_lr = 0.005;
    return outer;
}

SeedRun synthetic_seed(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    const auto suite = make_synthetic_suite(spec);
    const auto held = split_holdout(suite.train, {0.1, seed + 1, false}).first;
    const InnerSolveConfig inner;
    const auto outer = synthetic_outer();
    const std::size_t largest = *std::max_element(spec.n_per_group.begin(), spec.n_per_group.end());
    auto minority = [&](int g) { return spec.n_per_group[static_cast<std::size_t>(g)] < largest; };

    SeedRun r;
    const auto clean = gsr_run(held, suite.target, suite.validation, inner, outer, InfluenceMethod::exact);
    r.gsr_wga = worst_group_accuracy(suite.test, clean.selected_psi).value;
    r.erm_wga = worst_group_accuracy(suite.test, erm_baseline(held, inner)).value;
    r.gb_wga = worst_group_accuracy(suite.test, group_balanced_baseline(held, inner)).value;
    auto minority_sum = [&](const StepRecord& row) {
        double s = 0.0;
        for (std::size_t g = 0; g < row.group_weight_sums.size(); ++g)
            if (minority(static_cast<int>(g))) s += row.group_weight_sums[g];
        return s;
    };
    r.minority_initial = minority_sum(clean.steps.front());
    r.minority_selected = minority_sum(clean.steps[static_cast<std::size_t>(clean.selected_step - 1)]);

    const auto noisy = inject_label_noise(held, {0.4, seed + 2});
    const auto run = gsr_run(noisy.dataset, suite.target, suite.validation, inner, outer, InfluenceMethod::exact);
    r.noisy_wga = worst_group_accuracy(suite.test, run.selected_psi).value;
    std::vector<bool> flipped(held.size(), false);
    for (auto i : noisy.flipped) flipped[i] = true;
    std::vector<double> fw, cw;
    for (std::size_t i = 0; i < held.size(); ++i) {
        if (!minority(held.groups()[i])) continue;
        (flipped[i] ? fw : cw).push_back(run.final_weights(static_cast<Eigen::Index>(i)));
    }
    r.flipped_minority_median = median(fw);
    r.clean_minority_median = median(cw);
    return r;
}

void ac5_to_7() {
    const auto t0 = Clock::now();
    std::vector<SeedRun> runs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        runs.push_back(synthetic_seed(seed));
        const auto& r = runs.back();
        std::printf("  seed %llu: worst-group acc GSR %.4f, ERM %.4f, group-balanced %.4f, noisy GSR %.4f; "
                    "minority weight %.4f -> %.4f; minority median weight flipped %.3g vs clean %.3g\n",
                    static_cast<unsigned long long>(seed), r.gsr_wga, r.erm_wga, r.gb_wga, r.noisy_wga,
                    r.minority_initial, r.minority_selected, r.flipped_minority_median, r.clean_minority_median);
    }
    const double secs = seconds_since(t0);
    double gsr = 0, erm = 0, gb = 0, noisy = 0;
    int upweighted = 0, median_ok = 0;
    for (const auto& r : runs) {
        gsr += r.gsr_wga / 5;
        erm += r.erm_wga / 5;
        gb += r.gb_wga / 5;
        noisy += r.noisy_wga / 5;
        if (r.minority_selected > r.minority_initial) ++upweighted;
        if (r.flipped_minority_median < r.clean_minority_median) ++median_ok;
    }
    verdict("AC5", gsr - erm >= 0.10 && gb - gsr <= 0.03 && secs <= 300.0,
            fmt("mean test worst-group accuracy GSR %.4f, ERM %.4f (gain %.4f >= 0.10), group-balanced %.4f "
                "(gap %.4f <= 0.03), %.1f s for clean + noisy runs",
                gsr, erm, gsr - erm, gb, gb - gsr, secs));
    verdict("AC6", upweighted >= 4,
            fmt("minority weight above its initial value at the selected step in %d/5 seeds", upweighted));
    verdict("AC7", gsr - noisy <= 0.05 && median_ok == 5,
            fmt("40%% flips: mean worst-group accuracy %.4f vs clean %.4f (drop %.4f <= 0.05); flipped minority "
                "median weight below clean in %d/5 seeds",
                noisy, gsr, gsr - noisy, median_ok));
}

bool same_bits(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

void ac8() {
    Rng rng(8);
    int configs = 0, simplex_ok = 0, fixed_ok = 0, select_ok = 0, determ_ok = 0;
    for (int t = 0; t < 20; ++t, ++configs) {
        const int m = 2 + static_cast<int>(rng.below(3));
        const auto inst = random_oracle_instance({10 + rng.below(30), 1 + rng.below(4),
                                                  2 + static_cast<int>(rng.below(2)), m, 3, 1.0, rng.next_u64()});
        const auto val = random_oracle_instance({2, inst.heldout.dim(), inst.heldout.num_classes(), m, 4, 1.0,
                                                 rng.next_u64()})
                             .target;
        OuterConfig outer;
        outer.steps = 4 + static_cast<int>(rng.below(8));
        outer.outer_lr = std::pow(10.0, -3.0 + 3.0 * rng.uniform01());
        outer.temperature = 0.05 + rng.uniform01();
        if (rng.below(2)) outer.clip_norm.reset();
        outer.lr_decay_every = 1 + static_cast<int>(rng.below(5));
        const auto method = rng.below(2) ? InfluenceMethod::exact : InfluenceMethod::hessian_free;
        InnerSolveConfig inner;
        inner.l2_coeff = 0.05 + rng.uniform01();

        const auto a = gsr_run(inst.heldout, inst.target, val, inner, outer, method);
        const auto b = gsr_run(inst.heldout, inst.target, val, inner, outer, method);

        bool simplex = std::abs(a.final_weights.sum() - 1.0) <= 1e-12 && a.final_weights.minCoeff() >= 0.0;
        bool select = true;
        double best = std::numeric_limits<double>::infinity();
        int best_step = 0;
        for (const auto& row : a.steps) {
            double s = 0.0;
            for (double v : row.group_weight_sums) s += v;
            simplex = simplex && std::abs(s - 1.0) <= 1e-12 && std::abs(row.gamma.sum() - 1.0) <= 1e-12 &&
                      row.gamma.minCoeff() >= 0.0;
            for (const auto& q : row.group_weight_quantiles) simplex = simplex && q[0] >= 0.0;
            if (row.val_wg_risk <= best) {
                best = row.val_wg_risk;
                best_step = row.step;
            }
            select = select && row.selected == (row.step == best_step);
        }
        select = select && a.selected_step == best_step && a.selected_score == best;
        simplex_ok += simplex;
        select_ok += select;

        bool determ = a.selected_step == b.selected_step && same_bits(a.final_weights, b.final_weights) &&
                      same_bits(a.selected_psi.psi, b.selected_psi.psi) && a.steps.size() == b.steps.size();
        for (std::size_t s = 0; determ && s < a.steps.size(); ++s)
            determ = same_bits(a.steps[s].gamma, b.steps[s].gamma) && a.steps[s].val_wg_risk == b.steps[s].val_wg_risk;
        determ_ok += determ;

        OuterConfig frozen = outer;
        frozen.outer_lr = 0.0;
        const auto z = gsr_run(inst.heldout, inst.target, val, inner, frozen, method);
        bool fixed = z.final_weights == SampleWeights::uniform(inst.heldout.size()).values();
        for (const auto& row : z.steps) fixed = fixed && row.group_weight_sums == z.steps.front().group_weight_sums;
        fixed_ok += fixed;
    }
    verdict("AC8", simplex_ok == configs && fixed_ok == configs && select_ok == configs && determ_ok == configs,
            fmt("%d random configs: simplex %d, zero-rate fixed point %d, selection monotone %d, bitwise "
                "determinism %d",
                configs, simplex_ok, fixed_ok, select_ok, determ_ok));
}

template <class F>
void guarded(const char* id, F f) {
    try {
        f();
    } catch (const std::exception& e) {
        verdict(id, false, std::string("exception: ") + e.what());
    }
}

}  // namespace

int main() {
    guarded("AC1", ac1);
    guarded("AC2", ac2);
    guarded("AC3", ac3);
    guarded("AC4", ac4);
    guarded("AC5-7", ac5_to_7);
    guarded("AC8", ac8);
    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
