#include "qloc/direct_imaging.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace qloc {

namespace {
constexpr double kWindowSigmas = 12.0;
constexpr double kDensityFloor = 1e-300;
}  // namespace

ArrivalDensity::ArrivalDensity(const SceneGeometry& geometry,
                               const GaussianPsf& psf)
    : geometry_(geometry), psf_(psf) {
  if (geometry.is_line()) {
    if (geometry.theta2 == 0.0) {
      throw ConfigError("degenerate line; use n=1 point");
    }
    window_lo_ = geometry.theta1 - 0.5 * geometry.theta2 -
                 kWindowSigmas * psf.sigma;
    window_hi_ = geometry.theta1 + 0.5 * geometry.theta2 +
                 kWindowSigmas * psf.sigma;
  } else {
    positions_ = source_positions(geometry);
    dx_dtheta2_ = source_position_derivatives(geometry);
    window_lo_ = positions_.front() - kWindowSigmas * psf.sigma;
    window_hi_ = positions_.back() + kWindowSigmas * psf.sigma;
  }
}

double ArrivalDensity::density(double x) const {
  if (geometry_.is_line()) {
    const double s = psf_.sigma;
    const double a = (x - geometry_.theta1 + 0.5 * geometry_.theta2) /
                     (std::sqrt(2.0) * s);
    const double b = (x - geometry_.theta1 - 0.5 * geometry_.theta2) /
                     (std::sqrt(2.0) * s);
    return (std::erf(a) - std::erf(b)) / (2.0 * geometry_.theta2);
  }
  double sum = 0.0;
  for (double xs : positions_) sum += psf_intensity(psf_, x - xs);
  return sum / static_cast<double>(positions_.size());
}

double ArrivalDensity::d_theta1(double x) const {
  const double s2 = psf_.sigma * psf_.sigma;
  if (geometry_.is_line()) {
    const double ep = geometry_.theta1 + 0.5 * geometry_.theta2;
    const double em = geometry_.theta1 - 0.5 * geometry_.theta2;
    return (psf_intensity(psf_, x - ep) - psf_intensity(psf_, x - em)) /
           geometry_.theta2;
  }
  double sum = 0.0;
  for (double xs : positions_) {
    sum += (x - xs) / s2 * psf_intensity(psf_, x - xs);
  }
  return sum / static_cast<double>(positions_.size());
}

double ArrivalDensity::d_theta2(double x) const {
  const double s2 = psf_.sigma * psf_.sigma;
  if (geometry_.is_line()) {
    // Leibniz rule on the line integral: end-point terms minus Lambda/theta2.
    const double ep = geometry_.theta1 + 0.5 * geometry_.theta2;
    const double em = geometry_.theta1 - 0.5 * geometry_.theta2;
    return (psf_intensity(psf_, x - ep) + psf_intensity(psf_, x - em)) /
               (2.0 * geometry_.theta2) -
           density(x) / geometry_.theta2;
  }
  // Accumulate mirrored pairs together: their derivatives cancel exactly at
  // coincident positions (theta2 = 0).
  const int n = geometry_.n;
  double sum = 0.0;
  for (int s = 0; s < n / 2; ++s) {
    const int t = n - 1 - s;
    sum += dx_dtheta2_[s] * (x - positions_[s]) / s2 *
               psf_intensity(psf_, x - positions_[s]) +
           dx_dtheta2_[t] * (x - positions_[t]) / s2 *
               psf_intensity(psf_, x - positions_[t]);
  }
  return sum / n;
}

ArrivalDensity arrival_density(const SceneGeometry& geometry,
                               const GaussianPsf& psf) {
  return ArrivalDensity(geometry, psf);
}

std::pair<double, double> density_gradient(const ArrivalDensity& density,
                                           double x) {
  return {density.d_theta1(x), density.d_theta2(x)};
}

FisherMatrix direct_imaging_fisher(const SceneGeometry& geometry,
                                   const GaussianPsf& psf,
                                   const PhotonBudget& budget,
                                   const QuadratureOptions& opts,
                                   QuadratureInfo* info) {
  const ArrivalDensity lam(geometry, psf);
  const double lo = lam.window_lo();
  const double hi = lam.window_hi();

  QuadratureOptions q = opts;
  q.initial_panels = std::clamp(
      static_cast<int>(std::ceil((hi - lo) / (2.0 * psf.sigma))), 16, 256);

  auto integrand = [&](double x) -> Eigen::Vector3d {
    const double p = lam.density(x);
    if (p < kDensityFloor) return Eigen::Vector3d::Zero();
    const double d1 = lam.d_theta1(x);
    const double d2 = lam.d_theta2(x);
    return Eigen::Vector3d(d1 * d1 / p, d2 * d2 / p, d1 * d2 / p);
  };

  const Eigen::Vector3d j = integrate(integrand, lo, hi, q, info);
  FisherMatrix fm;
  fm.n_photons = budget.n_mean;
  fm.j11 = budget.n_mean * j(0);
  fm.j22 = budget.n_mean * j(1);
  fm.j12 = budget.n_mean * j(2);
  return fm;
}

double direct_imaging_fisher_smallsep_series(double theta2,
                                             const GaussianPsf& psf) {
  if (!(theta2 >= 0.0) || theta2 > 0.5 * psf.sigma) {
    throw ConfigError(
        "smallsep series is only valid for 0 <= theta2 <= 0.5 sigma");
  }
  const double s2 = psf.sigma * psf.sigma;
  const double t2 = theta2 * theta2;
  return 1.0 / s2 - t2 / (4.0 * s2 * s2) + t2 * t2 / (16.0 * s2 * s2 * s2) -
         t2 * t2 * t2 / (64.0 * s2 * s2 * s2 * s2);
}

double qfi_two_point_smallsep_series(double theta2, const GaussianPsf& psf) {
  if (!(theta2 >= 0.0) || theta2 > 0.5 * psf.sigma) {
    throw ConfigError(
        "smallsep series is only valid for 0 <= theta2 <= 0.5 sigma");
  }
  const double s2 = psf.sigma * psf.sigma;
  const double t2 = theta2 * theta2;
  return 1.0 / s2 - t2 / (4.0 * s2 * s2) + t2 * t2 / (16.0 * s2 * s2 * s2) -
         t2 * t2 * t2 / (128.0 * s2 * s2 * s2 * s2);
}

}  // namespace qloc
