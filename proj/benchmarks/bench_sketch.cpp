#include <benchmark/benchmark.h>

#include "skeq/psd_matrix.hpp"
#include "skeq/sketch.hpp"
#include "skeq/spectrum.hpp"

namespace {

skeq::SketchSpec spec_for(skeq::SketchSpec::Kind kind, int p, int q) {
  skeq::SketchSpec spec;
  spec.kind = kind;
  spec.p = p;
  spec.q = q;
  spec.seed = 1;
  return spec;
}

void BM_GenerateGaussian(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  auto spec = spec_for(skeq::SketchSpec::Kind::IidGaussian, p, (4 * p) / 5);
  for (auto _ : state) {
    spec.seed += 1;
    benchmark::DoNotOptimize(skeq::generate_sketch(spec).sum());
  }
}
BENCHMARK(BM_GenerateGaussian)->Arg(256)->Arg(1024);

void BM_GenerateSrht(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  auto spec = spec_for(skeq::SketchSpec::Kind::Srht, p, (4 * p) / 5);
  for (auto _ : state) {
    spec.seed += 1;
    benchmark::DoNotOptimize(skeq::generate_sketch(spec).sum());
  }
}
BENCHMARK(BM_GenerateSrht)->Arg(256)->Arg(1024);

void BM_SketchedPseudoinverse(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  skeq::Spectrum s({0.0, 1.0, 2.0});
  skeq::PsdMatrix a = skeq::PsdMatrix::from_spectrum(s, p);
  auto spec = spec_for(skeq::SketchSpec::Kind::IidGaussian, p, (4 * p) / 5);
  for (auto _ : state) {
    spec.seed += 1;
    Eigen::MatrixXd sk = skeq::generate_sketch(spec);
    benchmark::DoNotOptimize(
        skeq::sketched_pseudoinverse(a, sk, 1.0).matrix.trace());
  }
}
BENCHMARK(BM_SketchedPseudoinverse)->Arg(128)->Arg(512);

}  // namespace
