#include <benchmark/benchmark.h>

#include "skeq/equiv.hpp"
#include "skeq/spectrum.hpp"

namespace {

skeq::Spectrum mp_spectrum(int nodes) {
  skeq::SpectrumPreset preset = skeq::SpectrumPreset::parse("mp:ratio=0.2");
  preset.resolution = nodes;
  return skeq::realize_preset(preset);
}

void BM_SolveMu(benchmark::State& state) {
  skeq::Spectrum s = mp_spectrum(static_cast<int>(state.range(0)));
  double lambda = 0.1;
  for (auto _ : state) {
    lambda = lambda > 4.0 ? 0.1 : lambda + 0.01;  // avoid trivial caching
    benchmark::DoNotOptimize(skeq::solve_mu(s, 0.8, lambda).mu);
  }
}
BENCHMARK(BM_SolveMu)->Arg(256)->Arg(2048);

void BM_SolveMuPrime(benchmark::State& state) {
  skeq::Spectrum s = mp_spectrum(1024);
  std::vector<double> psi(s.size(), 1.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(skeq::solve_mu_prime(s, 0.8, 1.0, psi));
}
BENCHMARK(BM_SolveMuPrime);

void BM_SolveEdge(benchmark::State& state) {
  skeq::Spectrum s = mp_spectrum(1024);
  for (auto _ : state)
    benchmark::DoNotOptimize(skeq::solve_edge(s, 0.5).z0);
}
BENCHMARK(BM_SolveEdge);

void BM_SolveGammaOrthogonal(benchmark::State& state) {
  skeq::Spectrum s = mp_spectrum(1024);
  for (auto _ : state)
    benchmark::DoNotOptimize(skeq::solve_gamma_orthogonal(s, 0.8, 1.0));
}
BENCHMARK(BM_SolveGammaOrthogonal);

void BM_RealizeMarchenkoPastur(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(mp_spectrum(static_cast<int>(state.range(0))).mean());
}
BENCHMARK(BM_RealizeMarchenkoPastur)->Arg(512)->Arg(2048);

}  // namespace

BENCHMARK_MAIN();
