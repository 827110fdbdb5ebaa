// Serial reference vs OpenMP kernels on synthetic held-out sized problems.
// Arguments: n (rows), d (features), K (classes).

#include <benchmark/benchmark.h>

#include <vector>

#include "gsr/kernels.hpp"
#include "gsr/rng.hpp"

namespace {

struct Problem {
    gsr::FeatureMatrix x;
    std::vector<int> y;
    Eigen::VectorXd w;
    Eigen::MatrixXd psi;
};

Problem make_problem(const benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    const auto d = static_cast<Eigen::Index>(state.range(1));
    const auto k = static_cast<int>(state.range(2));
    gsr::Rng rng(7);
    Problem p{gsr::FeatureMatrix(n, d), std::vector<int>(static_cast<std::size_t>(n)),
              Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)), Eigen::MatrixXd(d, k)};
    for (Eigen::Index i = 0; i < p.x.size(); ++i) p.x.data()[i] = rng.normal();
    for (auto& label : p.y) label = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    for (Eigen::Index i = 0; i < p.psi.size(); ++i) p.psi.data()[i] = 0.3 * rng.normal();
    return p;
}

void sizes(benchmark::internal::Benchmark* b) {
    b->Args({1000, 12, 2})->Args({10000, 64, 2})->Args({10000, 64, 5})->Args({50000, 128, 3});
    b->Unit(benchmark::kMicrosecond);
}

void hessian_sizes(benchmark::internal::Benchmark* b) {
    b->Args({1000, 12, 2})->Args({10000, 32, 2})->Args({10000, 64, 5});
    b->Unit(benchmark::kMicrosecond);
}

template <auto Fn>
void gradient(benchmark::State& state) {
    const auto p = make_problem(state);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(p.x, p.y, p.w, p.psi));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void sample_gradients(benchmark::State& state) {
    const auto p = make_problem(state);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(p.x, p.y, p.psi));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void hessian(benchmark::State& state) {
    const auto p = make_problem(state);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(p.x, p.w, p.psi));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

namespace ks = gsr::kernels::serial;
namespace kp = gsr::kernels::parallel;

BENCHMARK(gradient<ks::weighted_gradient>)->Name("weighted_gradient/serial")->Apply(sizes);
BENCHMARK(gradient<kp::weighted_gradient>)->Name("weighted_gradient/parallel")->Apply(sizes);
BENCHMARK(sample_gradients<ks::sample_gradients>)->Name("sample_gradients/serial")->Apply(sizes);
BENCHMARK(sample_gradients<kp::sample_gradients>)->Name("sample_gradients/parallel")->Apply(sizes);
BENCHMARK(hessian<ks::hessian>)->Name("hessian/serial")->Apply(hessian_sizes);
BENCHMARK(hessian<kp::hessian>)->Name("hessian/parallel")->Apply(hessian_sizes);

}  // namespace

BENCHMARK_MAIN();
