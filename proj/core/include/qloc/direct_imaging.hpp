#pragma once

#include <utility>
#include <vector>

#include "qloc/quadrature.hpp"
#include "qloc/scene.hpp"

namespace qloc {

/// @brief Photon-arrival probability density Lambda(x) of ideal continuum
/// direct imaging, with analytic theta-derivatives.
///
/// Point arrays use the equal-weight mixture of squared shifted PSFs; the
/// continuum line uses the closed-form erf difference (no inner quadrature).
class ArrivalDensity {
public:
  ArrivalDensity(const SceneGeometry& geometry, const GaussianPsf& psf);

  double density(double x) const;
  double d_theta1(double x) const;
  double d_theta2(double x) const;

  /// Window outside which the density is below ~1e-31 of its peak.
  double window_lo() const { return window_lo_; }
  double window_hi() const { return window_hi_; }

  const SceneGeometry& geometry() const { return geometry_; }
  const GaussianPsf& psf() const { return psf_; }

private:
  SceneGeometry geometry_;
  GaussianPsf psf_;
  std::vector<double> positions_;   // empty for the line
  std::vector<double> dx_dtheta2_;  // dx_s/dtheta2
  double window_lo_, window_hi_;
};

ArrivalDensity arrival_density(const SceneGeometry& geometry,
                               const GaussianPsf& psf);

/// (dLambda/dtheta1, dLambda/dtheta2) at x.
std::pair<double, double> density_gradient(const ArrivalDensity& density,
                                           double x);

/// @brief 2x2 classical/quantum information matrix over (theta1, theta2),
/// scaled by the photon budget recorded in n_photons.
struct FisherMatrix {
  double j11 = 0.0;
  double j22 = 0.0;
  double j12 = 0.0;
  double n_photons = 1.0;
};

/// Fisher information of ideal direct imaging,
/// J_mu_nu = N Int dx (dLambda/dmu)(dLambda/dnu) / Lambda,
/// by adaptive quadrature over the density window. Throws QuadratureError
/// (carrying the achieved error estimate) if the tolerance cannot be met.
FisherMatrix direct_imaging_fisher(const SceneGeometry& geometry,
                                   const GaussianPsf& psf,
                                   const PhotonBudget& budget,
                                   const QuadratureOptions& opts = {},
                                   QuadratureInfo* info = nullptr);

/// Small-separation series for the n=2 centroid information per photon:
/// 1/sigma^2 - theta2^2/(4 sigma^4) + theta2^4/(16 sigma^6)
///           - theta2^6/(64 sigma^8).
/// Cross-check oracle only; valid for theta2 <= 0.5 sigma.
double direct_imaging_fisher_smallsep_series(double theta2,
                                             const GaussianPsf& psf);

/// Matching truncated series for the two-point centroid QFI (the theta2^6
/// coefficient is half the direct-imaging one).
double qfi_two_point_smallsep_series(double theta2, const GaussianPsf& psf);

}  // namespace qloc
