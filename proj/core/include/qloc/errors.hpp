#pragma once

#include <stdexcept>
#include <string>

namespace qloc {

/// @brief Bad user input: invalid scene, malformed config, unknown quantity name.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// @brief A numerical procedure failed to reach its requested accuracy.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// @brief Adaptive quadrature exhausted its panel budget. Carries the achieved
/// error estimate so callers can report how far off the result is.
class QuadratureError : public NumericalError {
public:
  QuadratureError(const std::string& what, double achieved, double requested)
      : NumericalError(what + " (achieved error " + std::to_string(achieved) +
                       ", requested " + std::to_string(requested) + ")"),
        achieved_error(achieved),
        requested_tolerance(requested) {}

  double achieved_error;
  double requested_tolerance;
};

/// @brief A truncation/doubling loop did not converge.
class ConvergenceError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

}  // namespace qloc
