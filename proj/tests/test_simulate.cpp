#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "qloc/hg_spade.hpp"
#include "qloc/qfi_sld.hpp"
#include "qloc/rng.hpp"
#include "qloc/simulate.hpp"

using namespace qloc;

namespace {
const GaussianPsf kPsf(1.0);

double ks_distance(std::vector<double> xs,
                   const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max(d, std::abs(f - (i + 1) / n));
    d = std::max(d, std::abs(f - i / n));
  }
  return d;
}

double chi2_pvalue_counts(const std::vector<std::int64_t>& counts,
                          const std::vector<double>& probs, double n) {
  // merge bins with tiny expectation into the last kept bin
  double stat = 0.0;
  int dof = -1;
  double merged_obs = 0.0, merged_exp = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double expect = probs[k] * n;
    if (expect < 5.0) {
      merged_obs += static_cast<double>(counts[k]);
      merged_exp += expect;
      continue;
    }
    const double diff = counts[k] - expect;
    stat += diff * diff / expect;
    ++dof;
  }
  if (merged_exp > 5.0) {
    const double diff = merged_obs - merged_exp;
    stat += diff * diff / merged_exp;
    ++dof;
  }
  return oracle::chi2_pvalue(stat, std::max(dof, 1));
}
}  // namespace

TEST_CASE("seed replay is bit-exact") {
  const auto geometry = SceneGeometry::points(2, 0.3, 2.0);
  const auto a = sample_direct(geometry, kPsf, 5000, 42);
  const auto b = sample_direct(geometry, kPsf, 5000, 42);
  CHECK(a.positions == b.positions);
  CHECK(a.rng_algorithm == std::string(kRngAlgorithm));

  const auto dist = hg_mode_probs(geometry, kPsf, 40);
  const auto c = sample_modes(dist, geometry, kPsf, 5000, 7);
  const auto d = sample_modes(dist, geometry, kPsf, 5000, 7);
  CHECK(c.indices == d.indices);

  const auto e = sample_direct(geometry, kPsf, 5000, 43);
  CHECK(a.positions != e.positions);
}

TEST_CASE("direct sampling: single-point mean within the 3-sigma band") {
  const auto batch = sample_direct(SceneGeometry::points(1, 0.0, 0.0), kPsf,
                                   1'000'000, 20260810);
  double mean = 0.0;
  for (double x : batch.positions) mean += x;
  mean /= static_cast<double>(batch.positions.size());
  CHECK(std::abs(mean) < 4e-3);
}

TEST_CASE("direct sampling: bimodal pair matches the erf-mixture CDF") {
  const auto geometry = SceneGeometry::points(2, 0.0, 6.0);
  const auto batch = sample_direct(geometry, kPsf, 1'000'000, 99);
  const auto xs = source_positions(geometry);
  const double d = ks_distance(batch.positions, [&](double x) {
    double f = 0.0;
    for (double s : xs) f += oracle::normal_cdf(x - s);
    return f / static_cast<double>(xs.size());
  });
  CHECK(d < 0.002);
}

TEST_CASE("direct sampling: line segment CDF") {
  const double t1 = 0.5, t2 = 8.0;
  const auto batch = sample_direct(SceneGeometry::line(t1, t2), kPsf,
                                   500'000, 1234);
  // closed-form CDF: 1/2 + (sqrt(2)/(2 theta2)) [A(a) - A(b)],
  // A(z) = z erf(z) + exp(-z^2)/sqrt(pi)
  auto antideriv = [](double z) {
    return z * std::erf(z) + std::exp(-z * z) / std::sqrt(M_PI);
  };
  const double d = ks_distance(batch.positions, [&](double x) {
    const double a = (x - t1 + 0.5 * t2) / std::sqrt(2.0);
    const double b = (x - t1 - 0.5 * t2) / std::sqrt(2.0);
    return 0.5 + std::sqrt(2.0) * (antideriv(a) - antideriv(b)) / (2.0 * t2);
  });
  CHECK(d < 0.003);
}

TEST_CASE("modal sampling: degenerate distribution") {
  ModalDistribution dist;
  dist.probs = Eigen::VectorXd::Zero(5);
  dist.probs(0) = 1.0;
  dist.tail_mass = 0.0;
  const auto batch = sample_modes(dist, SceneGeometry::points(1, 0.0, 0.0),
                                  kPsf, 1000, 5);
  for (int idx : batch.indices) CHECK(idx == 0);
}

TEST_CASE("modal sampling: Poisson(1) law frequencies") {
  const auto geometry = SceneGeometry::points(1, 2.0, 0.0);  // Q = 1
  const auto dist = hg_mode_probs(geometry, kPsf, 40);
  const auto batch = sample_modes(dist, geometry, kPsf, 1'000'000, 31337);
  const auto counts = batch.counts();
  const double p0 =
      static_cast<double>(counts[0]) / static_cast<double>(batch.n_photons_drawn);
  CHECK(p0 == doctest::Approx(std::exp(-1.0)).epsilon(3e-3 / std::exp(-1.0)));

  std::vector<double> probs(static_cast<std::size_t>(dist.probs.size()) + 1);
  for (int q = 0; q < dist.probs.size(); ++q) probs[static_cast<std::size_t>(q)] = dist.probs(q);
  probs.back() = dist.tail_mass;
  CHECK(chi2_pvalue_counts(counts, probs, 1e6) > 1e-4);
}

TEST_CASE("sld sampling: frequencies match the outcome distribution") {
  const auto geometry = SceneGeometry::points(2, 0.5, 2.0);
  const auto meas = sld_measurement(SceneGeometry::points(2, 0.4, 2.0), kPsf, 30);
  const auto batch = sample_sld(meas, geometry, 200'000, 777);
  const auto model = meas.outcome_probs(geometry);
  std::vector<double> probs(static_cast<std::size_t>(model.probs.size()) + 1);
  for (int q = 0; q < model.probs.size(); ++q) probs[static_cast<std::size_t>(q)] = model.probs(q);
  probs.back() = model.tail_mass;
  CHECK(chi2_pvalue_counts(batch.counts(), probs, 2e5) > 1e-4);

  const auto replay = sample_sld(meas, geometry, 200'000, 777);
  CHECK(batch.indices == replay.indices);
}

TEST_CASE("independence: lag-1 autocorrelation is small") {
  const auto geometry = SceneGeometry::points(2, 0.0, 3.0);
  const auto batch = sample_direct(geometry, kPsf, 100'000, 2718);
  double m = 0.0;
  for (double x : batch.positions) m += x;
  m /= static_cast<double>(batch.positions.size());
  double c0 = 0.0, c1 = 0.0;
  for (std::size_t i = 0; i < batch.positions.size(); ++i) {
    c0 += (batch.positions[i] - m) * (batch.positions[i] - m);
    if (i + 1 < batch.positions.size()) {
      c1 += (batch.positions[i] - m) * (batch.positions[i + 1] - m);
    }
  }
  CHECK(std::abs(c1 / c0) < 3.0 / std::sqrt(1e5));
}

TEST_CASE("poisson count mode draws a Poisson photon number") {
  double mean = 0.0, sq = 0.0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    const auto batch = sample_direct(SceneGeometry::points(1, 0.0, 0.0), kPsf,
                                     1000, 50 + r, CountMode::PoissonN);
    mean += static_cast<double>(batch.n_photons_drawn);
    sq += static_cast<double>(batch.n_photons_drawn) *
          static_cast<double>(batch.n_photons_drawn);
  }
  mean /= reps;
  const double var = sq / reps - mean * mean;
  CHECK(mean == doctest::Approx(1000.0).epsilon(0.01));
  CHECK(var == doctest::Approx(1000.0).epsilon(0.25));

  const auto exact = sample_direct(SceneGeometry::points(1, 0.0, 0.0), kPsf,
                                   1000, 50, CountMode::ExactN);
  CHECK(exact.n_photons_drawn == 1000);
}

TEST_CASE("batch CSV round trip") {
  const auto geometry = SceneGeometry::points(2, 0.25, 1.75);
  const auto batch = sample_direct(geometry, kPsf, 200, 11);
  const auto back = batch_from_csv(batch_to_csv(batch));
  CHECK(back.kind == MeasurementKind::DirectImaging);
  CHECK(back.seed == 11);
  CHECK(back.positions == batch.positions);
  CHECK(back.scene.n == 2);
  CHECK(back.scene.theta1 == 0.25);

  const auto dist = hg_mode_probs(geometry, kPsf, 30);
  const auto modal = sample_modes(dist, geometry, kPsf, 300, 12);
  const auto modal_back = batch_from_csv(batch_to_csv(modal));
  CHECK(modal_back.indices == modal.indices);
  CHECK(modal_back.n_outcome_bins == modal.n_outcome_bins);

  CHECK_THROWS_AS(batch_from_csv("garbage"), ConfigError);
}

TEST_CASE("count-vector binary form") {
  const auto geometry = SceneGeometry::line(0.1, 3.0);
  const auto dist = hg_mode_probs(geometry, kPsf, 25);
  const auto batch = sample_modes(dist, geometry, kPsf, 5000, 21);
  const auto blob = batch_to_count_binary(batch);
  const auto decoded = batch_from_count_binary(blob);
  CHECK(decoded.kind == MeasurementKind::HgSpade);
  CHECK(decoded.seed == 21);
  CHECK(decoded.n_photons == 5000);
  CHECK(decoded.theta2 == 3.0);
  const auto counts = batch.counts();
  REQUIRE(decoded.counts.size() == counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    CHECK(decoded.counts[i] == counts[i]);
  }
  std::int64_t total = 0;
  for (auto c : decoded.counts) total += c;
  CHECK(total == 5000);

  const auto direct = sample_direct(geometry, kPsf, 10, 3);
  CHECK_THROWS_AS(batch_to_count_binary(direct), ConfigError);

  auto corrupt = blob;
  corrupt[0] ^= 0xFF;
  CHECK_THROWS_WITH(batch_from_count_binary(corrupt),
                    doctest::Contains("magic"));
}
