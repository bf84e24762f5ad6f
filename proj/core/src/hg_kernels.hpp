#pragma once

// Internal kernels shared by the HG-SPADE and QFI/SLD modules: Poisson mode
// weights in log space and Hermite-Gaussian expansion coefficients of a
// shifted PSF. Not installed.

#include <cmath>

#include <Eigen/Core>

namespace qloc::detail {

// exp(-Q) Q^q / q!, evaluated via log-gamma so it stays finite for Q up to
// ~1e4 and large q.
inline double poisson_pmf(double mean, int q) {
  if (mean == 0.0) return q == 0 ? 1.0 : 0.0;
  if (q == 0) return std::exp(-mean);
  return std::exp(-mean + q * std::log(mean) - std::lgamma(q + 1.0));
}

// d/dQ [exp(-Q) Q^q / q!] = exp(-Q) (q Q^(q-1) - Q^q) / q!,
// with the q = 0 convention q Q^(q-1) = 0.
inline double poisson_pmf_dmean(double mean, int q) {
  if (mean == 0.0) {
    if (q == 0) return -1.0;
    if (q == 1) return 1.0;
    return 0.0;
  }
  if (q == 0) return -std::exp(-mean);
  // pmf * (q/Q - 1); rewrite via pmf(q-1) to avoid amplifying q/Q for tiny Q.
  return poisson_pmf(mean, q - 1) - poisson_pmf(mean, q);
}

inline Eigen::VectorXd poisson_pmf_vector(double mean, int q_max) {
  Eigen::VectorXd p(q_max + 1);
  if (mean < 600.0) {
    // exp(-mean) is representable; the upward recurrence is exact and cheap.
    p(0) = std::exp(-mean);
    for (int q = 1; q <= q_max; ++q) p(q) = p(q - 1) * mean / q;
  } else {
    for (int q = 0; q <= q_max; ++q) p(q) = poisson_pmf(mean, q);
  }
  return p;
}

// Coefficients of psi(x' - x) in the HG basis matched to the PSF:
// c_q(x) = exp(-x^2/(8 sigma^2)) (x/(2 sigma))^q / sqrt(q!).
// Stable upward recurrence; sum_q c_q^2 = 1.
inline Eigen::VectorXd hg_coefficients(double x, double sigma, int q_max) {
  Eigen::VectorXd c(q_max + 1);
  const double u = x / (2.0 * sigma);
  c(0) = std::exp(-x * x / (8.0 * sigma * sigma));
  for (int q = 1; q <= q_max; ++q) c(q) = c(q - 1) * u / std::sqrt(double(q));
  return c;
}

// d c_q/dx = sqrt(q) c_{q-1} / (2 sigma) - x c_q / (4 sigma^2).
inline Eigen::VectorXd hg_coefficient_derivs(const Eigen::VectorXd& c, double x,
                                             double sigma) {
  Eigen::VectorXd dc(c.size());
  const double damp = x / (4.0 * sigma * sigma);
  dc(0) = -damp * c(0);
  for (int q = 1; q < c.size(); ++q) {
    dc(q) = std::sqrt(double(q)) * c(q - 1) / (2.0 * sigma) - damp * c(q);
  }
  return dc;
}

}  // namespace qloc::detail
