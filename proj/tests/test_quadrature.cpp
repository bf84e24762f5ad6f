#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Core>

#include "qloc/quadrature.hpp"

using namespace qloc;

TEST_CASE("polynomials are exact") {
  auto cube = [](double x) { return x * x * x - 2.0 * x + 1.0; };
  CHECK(integrate(cube, -1.0, 3.0) == doctest::Approx(16.0).epsilon(1e-14));
  CHECK(integrate_local(cube, -1.0, 3.0) ==
        doctest::Approx(16.0).epsilon(1e-14));
}

TEST_CASE("gaussian integral over a wide window") {
  auto g = [](double x) { return std::exp(-0.5 * x * x); };
  const double exact = std::sqrt(2.0 * M_PI);
  QuadratureOptions opts;
  opts.initial_panels = 32;
  CHECK(integrate(g, -30.0, 30.0, opts) == doctest::Approx(exact).epsilon(1e-12));
  CHECK(integrate_local(g, -30.0, 30.0, opts) ==
        doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("narrow feature inside a wide window is found") {
  // A sigma=0.05 bump in [-50, 50]; the initial subdivision must catch it.
  auto bump = [](double x) { return std::exp(-x * x / (2.0 * 0.05 * 0.05)); };
  const double exact = 0.05 * std::sqrt(2.0 * M_PI);
  QuadratureOptions opts;
  opts.initial_panels = 256;
  CHECK(integrate(bump, -50.0, 50.0, opts) ==
        doctest::Approx(exact).epsilon(1e-9));
}

TEST_CASE("oscillatory integrand") {
  auto f = [](double x) { return std::sin(x) * std::exp(-x / 5.0); };
  // int_0^20 sin(x) e^(-x/5) dx = [25/26] (1 - e^-4 (cos 20 + 5 sin 20) / 5) ...
  // compare against a dense evaluation instead of a closed form.
  const double coarse = integrate(f, 0.0, 20.0);
  double riemann = 0.0;
  const int n = 2'000'000;
  for (int i = 0; i < n; ++i) {
    riemann += f((i + 0.5) * 20.0 / n) * 20.0 / n;
  }
  CHECK(coarse == doctest::Approx(riemann).epsilon(1e-9));
}

TEST_CASE("vector-valued integrand") {
  auto f = [](double x) {
    Eigen::VectorXd v(2);
    v << x * x, std::exp(-x * x);
    return v;
  };
  const Eigen::VectorXd r = integrate(f, -7.0, 7.0);
  CHECK(r(0) == doctest::Approx(2.0 * 343.0 / 3.0).epsilon(1e-12));
  CHECK(r(1) == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-10));
}

TEST_CASE("matrix-valued streaming integrand matches per-entry results") {
  auto f = [](double x) {
    Eigen::MatrixXd m(2, 2);
    const double g = std::exp(-0.5 * x * x);
    m << g, x * g, x * g, x * x * g;
    return m;
  };
  QuadratureOptions opts;
  opts.rtol = 1e-11;
  const Eigen::MatrixXd m = integrate_local(f, -20.0, 20.0, opts);
  const double z = std::sqrt(2.0 * M_PI);
  CHECK(m(0, 0) == doctest::Approx(z).epsilon(1e-11));
  CHECK(m(0, 1) == doctest::Approx(0.0).epsilon(1e-11));
  CHECK(m(1, 1) == doctest::Approx(z).epsilon(1e-10));
  CHECK(m(0, 1) == m(1, 0));
}

TEST_CASE("budget exhaustion raises QuadratureError with the achieved error") {
  auto nasty = [](double x) { return std::sqrt(std::abs(x)); };
  QuadratureOptions opts;
  opts.rtol = 1e-15;
  opts.atol = 1e-30;
  opts.max_panels = 64;
  try {
    integrate(nasty, -1.0, 1.0, opts);
    FAIL("expected QuadratureError");
  } catch (const QuadratureError& e) {
    CHECK(e.achieved_error > 0.0);
    CHECK(e.achieved_error > e.requested_tolerance);
  }
}

TEST_CASE("info reports panels and error estimate") {
  QuadratureInfo info;
  auto g = [](double x) { return std::exp(-0.5 * x * x); };
  integrate(g, -10.0, 10.0, {}, &info);
  CHECK(info.panels >= 16);
  CHECK(info.error_estimate >= 0.0);
  CHECK(info.error_estimate < 1e-9);
}
