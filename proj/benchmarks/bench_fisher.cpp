#include <benchmark/benchmark.h>

#include "qloc/direct_imaging.hpp"
#include "qloc/hg_spade.hpp"
#include "qloc/qfi_sld.hpp"
#include "qloc/simulate.hpp"

namespace {

using namespace qloc;

void bm_direct_imaging_fisher(benchmark::State& state) {
  const auto geometry = SceneGeometry::points(
      static_cast<int>(state.range(0)), 0.0, 2.0);
  const GaussianPsf psf(1.0);
  const PhotonBudget budget(1.0);
  for (auto _ : state) {
    auto fm = direct_imaging_fisher(geometry, psf, budget);
    benchmark::DoNotOptimize(fm);
  }
}
BENCHMARK(bm_direct_imaging_fisher)->Arg(2)->Arg(6)->Unit(benchmark::kMillisecond);

void bm_direct_imaging_fisher_line(benchmark::State& state) {
  const auto geometry = SceneGeometry::line(0.0, static_cast<double>(state.range(0)));
  const GaussianPsf psf(1.0);
  const PhotonBudget budget(1.0);
  for (auto _ : state) {
    auto fm = direct_imaging_fisher(geometry, psf, budget);
    benchmark::DoNotOptimize(fm);
  }
}
BENCHMARK(bm_direct_imaging_fisher_line)->Arg(4)->Arg(40)->Unit(benchmark::kMillisecond);

void bm_qfi_matrix_points(benchmark::State& state) {
  const auto geometry = SceneGeometry::points(
      static_cast<int>(state.range(0)), 0.0, 2.0);
  const GaussianPsf psf(1.0);
  const PhotonBudget budget(1.0);
  for (auto _ : state) {
    auto k = qfi_matrix(geometry, psf, budget);
    benchmark::DoNotOptimize(k);
  }
}
BENCHMARK(bm_qfi_matrix_points)->Arg(2)->Arg(6)->Unit(benchmark::kMillisecond);

void bm_qfi_matrix_line(benchmark::State& state) {
  const auto geometry = SceneGeometry::line(0.0, static_cast<double>(state.range(0)));
  const GaussianPsf psf(1.0);
  const PhotonBudget budget(1.0);
  for (auto _ : state) {
    auto k = qfi_matrix(geometry, psf, budget);
    benchmark::DoNotOptimize(k);
  }
}
BENCHMARK(bm_qfi_matrix_line)->Arg(4)->Arg(12)->Unit(benchmark::kMillisecond);

void bm_hg_spade_fisher(benchmark::State& state) {
  const auto geometry = SceneGeometry::points(2, 1.0, 2.0);
  const GaussianPsf psf(1.0);
  const PhotonBudget budget(1.0);
  for (auto _ : state) {
    auto fi = hg_spade_fisher_centroid(geometry, psf, budget);
    benchmark::DoNotOptimize(fi);
  }
}
BENCHMARK(bm_hg_spade_fisher)->Unit(benchmark::kMillisecond);

void bm_sample_direct(benchmark::State& state) {
  const auto geometry = SceneGeometry::points(2, 0.0, 2.0);
  const GaussianPsf psf(1.0);
  for (auto _ : state) {
    auto batch = sample_direct(geometry, psf, 100000, 42);
    benchmark::DoNotOptimize(batch);
  }
}
BENCHMARK(bm_sample_direct)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
