#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "qloc/direct_imaging.hpp"
#include "qloc/qfi_sld.hpp"
#include "qloc/rng.hpp"

using namespace qloc;

namespace {
const GaussianPsf kPsf(1.0);
const PhotonBudget kOnePhoton(1.0);
}  // namespace

TEST_CASE("density closed forms") {
  // n=1: squared PSF
  const ArrivalDensity single(SceneGeometry::points(1, 0.0, 0.0), kPsf);
  for (double x : {0.0, 0.7, -1.9}) {
    CHECK(single.density(x) ==
          doctest::Approx(std::exp(-x * x / 2.0) / std::sqrt(2.0 * M_PI))
              .epsilon(1e-14));
  }

  // n=2, theta2=2: density(0) = exp(-1/2)/sqrt(2 pi)
  const ArrivalDensity pair(SceneGeometry::points(2, 0.0, 2.0), kPsf);
  CHECK(pair.density(0.0) ==
        doctest::Approx(std::exp(-0.5) / std::sqrt(2.0 * M_PI)).epsilon(1e-14));
  CHECK(pair.density(0.0) == doctest::Approx(0.24197).epsilon(1e-4));

  // line theta2=20: plateau value 1/theta2
  const ArrivalDensity line(SceneGeometry::line(0.0, 20.0), kPsf);
  CHECK(line.density(0.0) == doctest::Approx(0.05).epsilon(1e-6 / 0.05));
}

TEST_CASE("density is normalized and nonnegative") {
  Rng rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform01() * 5);
    const double t1 = rng.uniform(-2.0, 2.0);
    const double t2 = n == 1 ? 0.0 : rng.uniform(0.1, 8.0);
    const ArrivalDensity lam(SceneGeometry::points(n, t1, t2), kPsf);
    const double mass = oracle::integrate(
        [&](double x) { return lam.density(x); }, lam.window_lo(),
        lam.window_hi(), 1e-13);
    CHECK(mass >= 1.0 - 1e-10);
    CHECK(mass <= 1.0 + 1e-10);
    for (int i = 0; i < 20; ++i) {
      CHECK(lam.density(rng.uniform(lam.window_lo(), lam.window_hi())) >= 0.0);
    }
  }
  const ArrivalDensity line(SceneGeometry::line(0.3, 11.0), kPsf);
  const double mass = oracle::integrate(
      [&](double x) { return line.density(x); }, line.window_lo(),
      line.window_hi(), 1e-13);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("parity about the centroid: density even, d1 odd, d2 even") {
  Rng rng(13);
  for (const auto& geometry :
       {SceneGeometry::points(3, 0.8, 2.5), SceneGeometry::points(4, -1.2, 5.0),
        SceneGeometry::line(0.4, 6.0)}) {
    const ArrivalDensity lam(geometry, kPsf);
    for (int i = 0; i < 20; ++i) {
      const double u = rng.uniform(0.0, 6.0);
      CHECK(lam.density(geometry.theta1 + u) ==
            doctest::Approx(lam.density(geometry.theta1 - u)).epsilon(1e-12));
      CHECK(lam.d_theta1(geometry.theta1 + u) ==
            doctest::Approx(-lam.d_theta1(geometry.theta1 - u)).epsilon(1e-11));
      CHECK(lam.d_theta2(geometry.theta1 + u) ==
            doctest::Approx(lam.d_theta2(geometry.theta1 - u)).epsilon(1e-11));
    }
  }
}

TEST_CASE("gradient special values") {
  // d1 vanishes at the centroid
  for (const auto& geometry :
       {SceneGeometry::points(2, 0.5, 3.0), SceneGeometry::points(5, -0.7, 4.0),
        SceneGeometry::line(1.1, 7.0)}) {
    const ArrivalDensity lam(geometry, kPsf);
    CHECK(lam.d_theta1(geometry.theta1) == doctest::Approx(0.0).epsilon(1e-14));
  }

  // coincident pair: d2 identically zero
  const ArrivalDensity merged(SceneGeometry::points(2, 0.3, 0.0), kPsf);
  for (double x : {-2.0, 0.3, 1.4}) CHECK(merged.d_theta2(x) == 0.0);

  // line end-point formula: d1(theta1 + theta2/2) = psi^2(0)/theta2
  const double t2 = 10.0;
  const ArrivalDensity line(SceneGeometry::line(0.0, t2), kPsf);
  CHECK(line.d_theta1(5.0) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * M_PI) / t2).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(17);
  auto check_scene = [&](const SceneGeometry& geometry) {
    const ArrivalDensity lam(geometry, kPsf);
    const double h = 1e-6;
    for (int i = 0; i < 20; ++i) {
      const double x =
          rng.uniform(geometry.theta1 - 6.0, geometry.theta1 + 6.0);
      auto density_at = [&](double t1, double t2) {
        SceneGeometry g = geometry;
        g.theta1 = t1;
        g.theta2 = t2;
        return ArrivalDensity(g, kPsf).density(x);
      };
      const double fd1 = (density_at(geometry.theta1 + h, geometry.theta2) -
                          density_at(geometry.theta1 - h, geometry.theta2)) /
                         (2.0 * h);
      const double fd2 = (density_at(geometry.theta1, geometry.theta2 + h) -
                          density_at(geometry.theta1, geometry.theta2 - h)) /
                         (2.0 * h);
      const auto [d1, d2] = density_gradient(lam, x);
      CHECK(d1 == doctest::Approx(fd1).epsilon(1e-6).scale(1e-8));
      CHECK(d2 == doctest::Approx(fd2).epsilon(1e-6).scale(1e-8));
    }
  };
  check_scene(SceneGeometry::points(2, 0.4, 1.7));
  check_scene(SceneGeometry::points(6, -0.9, 6.3));
  check_scene(SceneGeometry::line(0.25, 4.4));
}

TEST_CASE("degenerate line is rejected") {
  CHECK_THROWS_WITH(ArrivalDensity(SceneGeometry::line(0.0, 0.0), kPsf),
                    "degenerate line; use n=1 point");
}

TEST_CASE("fisher: single point gives N/sigma^2 for any N and sigma") {
  const auto fm = direct_imaging_fisher(SceneGeometry::points(1, 0.4, 0.0),
                                        kPsf, kOnePhoton);
  CHECK(fm.j11 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fm.j22 == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  const GaussianPsf wide(2.0);
  const auto fm2 = direct_imaging_fisher(SceneGeometry::points(1, 0.0, 0.0),
                                         wide, PhotonBudget(1000.0));
  CHECK(fm2.j11 == doctest::Approx(250.0).epsilon(1e-10));
  CHECK(fm2.n_photons == 1000.0);
}

TEST_CASE("fisher: two-point small separation approaches N/sigma^2") {
  const auto fm = direct_imaging_fisher(SceneGeometry::points(2, 0.0, 1e-4),
                                        kPsf, kOnePhoton);
  CHECK(fm.j11 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("fisher: strictly below the analytic QFI at theta2 = 2 sigma") {
  const auto fm = direct_imaging_fisher(SceneGeometry::points(2, 0.0, 2.0),
                                        kPsf, kOnePhoton);
  const double k11 =
      qfi_two_point_analytic(2.0, kPsf, kOnePhoton).qfi.k11;
  CHECK(fm.j11 < k11);
  CHECK(fm.j11 > 0.0);
  CHECK(k11 == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("fisher: centroid invariance and off-diagonal suppression") {
  const auto a = direct_imaging_fisher(SceneGeometry::points(3, 0.0, 2.4),
                                       kPsf, kOnePhoton);
  const auto b = direct_imaging_fisher(SceneGeometry::points(3, 1.9, 2.4),
                                       kPsf, kOnePhoton);
  CHECK(a.j11 == doctest::Approx(b.j11).epsilon(1e-10));
  CHECK(a.j22 == doctest::Approx(b.j22).epsilon(1e-10));
  CHECK(std::abs(a.j12) <= 1e-8 * std::max(a.j11, a.j22));
  CHECK(std::abs(b.j12) <= 1e-8 * std::max(b.j11, b.j22));
  CHECK(std::abs(a.j12) <= std::sqrt(a.j11 * a.j22) + 1e-12);
}

TEST_CASE("fisher: continuum scaling toward the large-length constant") {
  // theta2 * j11 rises toward its asymptote and is flat to ~1e-8 by
  // theta2 ~ 10 sigma, so allow quadrature-level slack on the ordering.
  double prev = 0.0;
  for (double t2 : {10.0, 16.0, 25.0, 40.0}) {
    const auto fm =
        direct_imaging_fisher(SceneGeometry::line(0.0, t2), kPsf, kOnePhoton);
    const double scaled = t2 * fm.j11;
    CHECK(scaled > prev - 1e-7);
    prev = scaled;
  }
  CHECK(prev == doctest::Approx(1.80).epsilon(0.02 / 1.80));
  const auto small =
      direct_imaging_fisher(SceneGeometry::line(0.0, 4.0), kPsf, kOnePhoton);
  CHECK(4.0 * small.j11 < prev);  // still climbing below 10 sigma
}

TEST_CASE("fisher: quadrature failure carries the achieved error") {
  QuadratureOptions opts;
  opts.rtol = 1e-14;
  opts.atol = 1e-30;
  opts.max_panels = 24;
  opts.initial_panels = 16;
  try {
    direct_imaging_fisher(SceneGeometry::points(2, 0.0, 2.0), kPsf, kOnePhoton,
                          opts);
    FAIL("expected QuadratureError");
  } catch (const QuadratureError& e) {
    CHECK(e.achieved_error > 0.0);
  }
}

TEST_CASE("small-separation series") {
  CHECK(direct_imaging_fisher_smallsep_series(0.0, kPsf) == 1.0);
  CHECK_THROWS_AS(direct_imaging_fisher_smallsep_series(0.6, kPsf),
                  ConfigError);

  // quadrature agrees with the series to the O(theta2^8) residual
  const double t2 = 0.2;
  const auto fm = direct_imaging_fisher(SceneGeometry::points(2, 0.0, t2),
                                        kPsf, kOnePhoton);
  const double series = direct_imaging_fisher_smallsep_series(t2, kPsf);
  CHECK(std::abs(fm.j11 - series) < 1e-7);

  // the matching QFI series differs only in the 6th order (factor 2)
  const double kser = qfi_two_point_smallsep_series(t2, kPsf);
  const double sixth = t2 * t2 * t2 * t2 * t2 * t2;
  CHECK(series - kser == doctest::Approx(-sixth / 128.0).epsilon(1e-12));
}

TEST_CASE("fisher scales linearly in the photon budget") {
  const auto one = direct_imaging_fisher(SceneGeometry::points(2, 0.0, 1.5),
                                         kPsf, kOnePhoton);
  const auto many = direct_imaging_fisher(SceneGeometry::points(2, 0.0, 1.5),
                                          kPsf, PhotonBudget(250.0));
  CHECK(many.j11 == doctest::Approx(250.0 * one.j11).epsilon(1e-12));
  CHECK(many.j22 == doctest::Approx(250.0 * one.j22).epsilon(1e-12));
}
