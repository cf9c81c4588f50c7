// Serial reference kernels against their OpenMP counterparts.
//
//   build/bench/bench_kernels --benchmark_counters_tabular=true
//
// The range argument is n (nodes per axis); the grid has n^2 nodes.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "stiffavg/kernels.hpp"

namespace k = stiffavg::kernels;

namespace {

struct Fixture {
  k::StencilGrid g;
  std::vector<k::SymTensor> d;
  std::vector<k::Velocity> b;
  std::vector<double> u, w, out;

  explicit Fixture(int n) : g{2, n, 2.0 * 4.0 / n, true} {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const std::size_t m = g.size();
    d.resize(m);
    b.resize(m);
    u.resize(m);
    w.resize(m);
    out.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double a = unit(rng);
      d[i] = {2.0 + a, 0.3 * a, 1.5 - 0.5 * a};
      b[i] = {unit(rng), unit(rng)};
      u[i] = unit(rng);
      w[i] = unit(rng);
    }
  }
};

template <bool Omp>
void BM_diffusion_apply(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Omp)
      k::omp::diffusion_apply(f.g, f.d, f.u, f.out);
    else
      k::serial::diffusion_apply(f.g, f.d, f.u, f.out);
    benchmark::DoNotOptimize(f.out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.g.size()));
}

template <bool Omp>
void BM_transport_apply(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  const int order = static_cast<int>(state.range(1));
  for (auto _ : state) {
    if constexpr (Omp)
      k::omp::transport_apply(f.g, f.b, f.u, f.out, order);
    else
      k::serial::transport_apply(f.g, f.b, f.u, f.out, order);
    benchmark::DoNotOptimize(f.out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.g.size()));
}

template <bool Omp>
void BM_diffusion_form(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const double a = Omp ? k::omp::diffusion_form(f.g, f.d, f.u, f.w) : k::serial::diffusion_form(f.g, f.d, f.u, f.w);
    benchmark::DoNotOptimize(a);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.g.size()));
}

template <bool Omp>
void BM_dot(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const double a = Omp ? k::omp::dot(f.u, f.w) : k::serial::dot(f.u, f.w);
    benchmark::DoNotOptimize(a);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.g.size()));
}

}  // namespace

BENCHMARK(BM_diffusion_apply<false>)->Name("diffusion_apply/serial")->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(BM_diffusion_apply<true>)->Name("diffusion_apply/omp")->RangeMultiplier(2)->Range(64, 512)->UseRealTime();
BENCHMARK(BM_transport_apply<false>)->Name("transport_apply/serial")->ArgsProduct({{128, 512}, {2, 4}});
BENCHMARK(BM_transport_apply<true>)->Name("transport_apply/omp")->ArgsProduct({{128, 512}, {2, 4}})->UseRealTime();
BENCHMARK(BM_diffusion_form<false>)->Name("diffusion_form/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_diffusion_form<true>)->Name("diffusion_form/omp")->Arg(128)->Arg(512)->UseRealTime();
BENCHMARK(BM_dot<false>)->Name("dot/serial")->Arg(512)->Arg(1024);
BENCHMARK(BM_dot<true>)->Name("dot/omp")->Arg(512)->Arg(1024)->UseRealTime();

BENCHMARK_MAIN();
