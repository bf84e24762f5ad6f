#include "qloc/scene.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace qloc {

GaussianPsf::GaussianPsf(double sigma_) : sigma(sigma_) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("GaussianPsf: sigma must be positive and finite");
  }
}

double psf_value(const GaussianPsf& psf, double x) {
  const double s2 = psf.sigma * psf.sigma;
  return std::pow(2.0 * M_PI * s2, -0.25) * std::exp(-x * x / (4.0 * s2));
}

double psf_intensity(const GaussianPsf& psf, double x) {
  const double s2 = psf.sigma * psf.sigma;
  return std::exp(-x * x / (2.0 * s2)) / std::sqrt(2.0 * M_PI * s2);
}

double delta_k_squared(const GaussianPsf& psf) {
  return 1.0 / (4.0 * psf.sigma * psf.sigma);
}

SceneGeometry SceneGeometry::points(int n, double theta1, double theta2) {
  if (n < 1) throw ConfigError("SceneGeometry: need at least one point source");
  if (!std::isfinite(theta1) || !std::isfinite(theta2)) {
    throw ConfigError("SceneGeometry: theta1/theta2 must be finite");
  }
  if (theta2 < 0.0) throw ConfigError("SceneGeometry: theta2 must be >= 0");
  if (n == 1 && theta2 != 0.0) {
    throw ConfigError("SceneGeometry: theta2 must be 0 for a single point");
  }
  SceneGeometry g;
  g.kind = SceneKind::PointArray;
  g.n = n;
  g.theta1 = theta1;
  g.theta2 = theta2;
  return g;
}

SceneGeometry SceneGeometry::line(double theta1, double theta2) {
  if (!std::isfinite(theta1) || !std::isfinite(theta2)) {
    throw ConfigError("SceneGeometry: theta1/theta2 must be finite");
  }
  if (theta2 < 0.0) throw ConfigError("SceneGeometry: theta2 must be >= 0");
  SceneGeometry g;
  g.kind = SceneKind::ContinuumLine;
  g.n = 0;
  g.theta1 = theta1;
  g.theta2 = theta2;
  return g;
}

PhotonBudget::PhotonBudget(double n_mean_) : n_mean(n_mean_) {
  if (!(n_mean > 0.0) || !std::isfinite(n_mean)) {
    throw ConfigError("PhotonBudget: n_mean must be positive and finite");
  }
}

std::vector<double> source_positions(const SceneGeometry& geometry) {
  if (geometry.is_line()) {
    throw ConfigError("continuum geometry has no discrete positions");
  }
  const int n = geometry.n;
  std::vector<double> x(static_cast<std::size_t>(n));
  if (n == 1) {
    x[0] = geometry.theta1;
    return x;
  }
  // Fill mirrored pairs from a single offset so that x_s and x_{n-1-s} are
  // exact reflections about theta1; at theta1 = 0 the pair negates bitwise.
  for (int s = 0; s < n / 2; ++s) {
    const double offset =
        geometry.theta2 * (0.5 - static_cast<double>(s) / (n - 1));
    x[static_cast<std::size_t>(s)] = geometry.theta1 - offset;
    x[static_cast<std::size_t>(n - 1 - s)] = geometry.theta1 + offset;
  }
  if (n % 2 == 1) x[static_cast<std::size_t>(n / 2)] = geometry.theta1;
  return x;
}

std::vector<double> source_position_derivatives(const SceneGeometry& geometry) {
  if (geometry.is_line()) {
    throw ConfigError("continuum geometry has no discrete positions");
  }
  const int n = geometry.n;
  std::vector<double> u(static_cast<std::size_t>(n), 0.0);
  if (n == 1) return u;
  for (int s = 0; s < n / 2; ++s) {
    const double c = 0.5 - static_cast<double>(s) / (n - 1);
    u[static_cast<std::size_t>(s)] = -c;
    u[static_cast<std::size_t>(n - 1 - s)] = c;
  }
  return u;
}

namespace {

const nlohmann::json& require_field(const nlohmann::json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) {
    throw ConfigError(std::string("scene descriptor: missing field \"") + name +
                      "\"");
  }
  return *it;
}

double require_number(const nlohmann::json& j, const char* name) {
  const auto& v = require_field(j, name);
  if (!v.is_number()) {
    throw ConfigError(std::string("scene descriptor: field \"") + name +
                      "\" must be a number");
  }
  return v.get<double>();
}

}  // namespace

SceneSpec scene_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("scene descriptor: invalid JSON: ") + e.what());
  }
  const auto& kind = require_field(j, "kind");
  if (!kind.is_string()) {
    throw ConfigError("scene descriptor: field \"kind\" must be a string");
  }
  const double theta1 = require_number(j, "theta1");
  const double theta2 = require_number(j, "theta2");
  const double sigma = require_number(j, "sigma");
  const double n_photons = require_number(j, "n_photons");

  SceneSpec spec;
  spec.psf = GaussianPsf(sigma);
  spec.budget = PhotonBudget(n_photons);
  const std::string k = kind.get<std::string>();
  if (k == "points") {
    const auto& nval = require_field(j, "n");
    if (!nval.is_number_integer()) {
      throw ConfigError("scene descriptor: field \"n\" must be an integer");
    }
    spec.geometry = SceneGeometry::points(nval.get<int>(), theta1, theta2);
  } else if (k == "line") {
    spec.geometry = SceneGeometry::line(theta1, theta2);
  } else {
    throw ConfigError("scene descriptor: kind must be \"points\" or \"line\"");
  }
  return spec;
}

std::string scene_to_json(const SceneSpec& spec) {
  nlohmann::json j;
  j["kind"] = spec.geometry.is_line() ? "line" : "points";
  j["n"] = spec.geometry.is_line() ? 0 : spec.geometry.n;
  j["theta1"] = spec.geometry.theta1;
  j["theta2"] = spec.geometry.theta2;
  j["sigma"] = spec.psf.sigma;
  j["n_photons"] = spec.budget.n_mean;
  return j.dump();
}

}  // namespace qloc
