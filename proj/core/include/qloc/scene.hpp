#pragma once

#include <string>
#include <vector>

#include "qloc/errors.hpp"

namespace qloc {

/// @brief Gaussian coherent point-spread function of width sigma.
///
/// sigma is the unit of length for everything downstream; information
/// quantities come out in 1/sigma^2.
struct GaussianPsf {
  double sigma = 1.0;

  explicit GaussianPsf(double sigma_);
  GaussianPsf() = default;
};

/// Field amplitude psi(x) = (2 pi sigma^2)^(-1/4) exp(-x^2 / 4 sigma^2).
double psf_value(const GaussianPsf& psf, double x);

/// Intensity |psi(x)|^2, a normalized Gaussian density of std sigma.
double psf_intensity(const GaussianPsf& psf, double x);

/// Mean-square wavenumber of the PSF; 1/(4 sigma^2) for the Gaussian.
double delta_k_squared(const GaussianPsf& psf);

enum class SceneKind { PointArray, ContinuumLine };

/// @brief Source constellation: n equally-bright equispaced points, or a
/// uniformly radiating line segment. theta1 is the centroid, theta2 the
/// end-to-end extent.
struct SceneGeometry {
  SceneKind kind = SceneKind::PointArray;
  int n = 1;  // number of points; ignored for ContinuumLine
  double theta1 = 0.0;
  double theta2 = 0.0;

  static SceneGeometry points(int n, double theta1, double theta2);
  static SceneGeometry line(double theta1, double theta2);

  bool is_line() const { return kind == SceneKind::ContinuumLine; }
};

/// @brief Mean number of detected photons over the integration.
struct PhotonBudget {
  double n_mean = 1.0;

  explicit PhotonBudget(double n_mean_);
  PhotonBudget() = default;
};

/// Positions x_s = theta1 - theta2/2 + (s-1) theta2/(n-1), ascending.
/// Built pairwise about the centroid so that mirrored points negate exactly
/// in floating point when theta1 = 0.
/// Throws ConfigError for ContinuumLine geometry.
std::vector<double> source_positions(const SceneGeometry& geometry);

/// dx_s/dtheta2 for each source, antisymmetric about the middle index
/// (exactly so in floating point). Zero for n = 1.
std::vector<double> source_position_derivatives(const SceneGeometry& geometry);

/// @brief A full scene description: geometry + PSF + photon budget.
struct SceneSpec {
  SceneGeometry geometry;
  GaussianPsf psf;
  PhotonBudget budget;
};

/// Parse the JSON scene descriptor
/// {"kind":"points"|"line","n":int,"theta1":x,"theta2":x,"sigma":x,"n_photons":x}.
/// theta1/theta2 are in the same units as sigma. Missing or ill-typed fields
/// raise ConfigError naming the field.
SceneSpec scene_from_json(const std::string& text);

std::string scene_to_json(const SceneSpec& spec);

}  // namespace qloc
