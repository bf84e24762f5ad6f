#include "qloc/hg_spade.hpp"

#include <algorithm>
#include <cmath>

#include "hg_kernels.hpp"
#include "qloc/quadrature.hpp"

namespace qloc {

namespace {

constexpr int kQMaxCap = 1 << 14;
constexpr double kProbFloor = 1e-300;

double mode_mean(double x, double sigma) {
  return x * x / (4.0 * sigma * sigma);
}

ModalDistribution probs_unchecked(const SceneGeometry& geometry,
                                  const GaussianPsf& psf, int q_max) {
  ModalDistribution dist;
  if (geometry.is_line()) {
    if (geometry.theta2 == 0.0) {
      throw ConfigError("degenerate line; use n=1 point");
    }
    const double lo = geometry.theta1 - 0.5 * geometry.theta2;
    const double hi = geometry.theta1 + 0.5 * geometry.theta2;
    QuadratureOptions opts;
    opts.rtol = 1e-11;
    opts.atol = 1e-15;
    opts.initial_panels = std::clamp(
        static_cast<int>(std::ceil((hi - lo) / psf.sigma)), 16, 512);
    auto f = [&](double y) {
      return detail::poisson_pmf_vector(mode_mean(y, psf.sigma), q_max);
    };
    dist.probs = integrate(f, lo, hi, opts) / geometry.theta2;
  } else {
    const auto xs = source_positions(geometry);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(q_max + 1);
    for (double x : xs) {
      acc += detail::poisson_pmf_vector(mode_mean(x, psf.sigma), q_max);
    }
    dist.probs = acc / static_cast<double>(xs.size());
  }
  dist.tail_mass = std::max(0.0, 1.0 - dist.probs.sum());
  return dist;
}

Eigen::VectorXd derivative_unchecked(const SceneGeometry& geometry,
                                     const GaussianPsf& psf, int q_max,
                                     Param which) {
  const double s2 = psf.sigma * psf.sigma;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(q_max + 1);

  if (geometry.is_line()) {
    if (geometry.theta2 == 0.0) {
      throw ConfigError("degenerate line; use n=1 point");
    }
    const double ep = geometry.theta1 + 0.5 * geometry.theta2;
    const double em = geometry.theta1 - 0.5 * geometry.theta2;
    const Eigen::VectorXd pp =
        detail::poisson_pmf_vector(mode_mean(ep, psf.sigma), q_max);
    const Eigen::VectorXd pm =
        detail::poisson_pmf_vector(mode_mean(em, psf.sigma), q_max);
    if (which == Param::Theta1) {
      d = (pp - pm) / geometry.theta2;
    } else {
      const ModalDistribution dist = probs_unchecked(geometry, psf, q_max);
      d = (pp + pm) / (2.0 * geometry.theta2) - dist.probs / geometry.theta2;
    }
    return d;
  }

  const auto xs = source_positions(geometry);
  const auto us = source_position_derivatives(geometry);
  const int n = geometry.n;

  auto source_term = [&](int s) {
    const double x = xs[static_cast<std::size_t>(s)];
    const double dmean_dtheta =
        which == Param::Theta1 ? x / (2.0 * s2)
                               : us[static_cast<std::size_t>(s)] * x / (2.0 * s2);
    const double mean = mode_mean(x, psf.sigma);
    Eigen::VectorXd t(q_max + 1);
    for (int q = 0; q <= q_max; ++q) {
      t(q) = dmean_dtheta * detail::poisson_pmf_dmean(mean, q);
    }
    return t;
  };

  // Mirrored pairs are summed together: at theta1 = 0 (centroid case) and at
  // theta2 = 0 (separation case) the two members cancel bitwise.
  for (int s = 0; s < n / 2; ++s) d += source_term(s) + source_term(n - 1 - s);
  if (n % 2 == 1) d += source_term(n / 2);
  return d / n;
}

double fisher_sum(const ModalDistribution& dist, const Eigen::VectorXd& d) {
  double sum = 0.0;
  for (int q = 0; q < dist.probs.size(); ++q) {
    const double p = dist.probs(q);
    if (p < kProbFloor) continue;
    sum += d(q) * d(q) / p;
  }
  return sum;
}

double fisher_converged(const SceneGeometry& geometry, const GaussianPsf& psf,
                        const PhotonBudget& budget, int q_max, Param which) {
  double prev = -1.0;
  bool have_prev = false;
  for (int q = std::max(q_max, 2); q <= kQMaxCap; q *= 2) {
    const ModalDistribution dist = probs_unchecked(geometry, psf, q);
    if (dist.tail_mass >= kTailTol) continue;  // not yet converged in q
    const Eigen::VectorXd d = derivative_unchecked(geometry, psf, q, which);
    const double fi = fisher_sum(dist, d);
    if (have_prev) {
      if (fi == prev || std::abs(fi - prev) <= 1e-8 * std::abs(fi)) {
        return budget.n_mean * fi;
      }
    }
    prev = fi;
    have_prev = true;
  }
  throw ConvergenceError(
      "SPADE Fisher information did not converge; increase q_max (last value " +
      std::to_string(prev) + ")");
}

}  // namespace

ModalDistribution hg_mode_probs_unchecked(const SceneGeometry& geometry,
                                          const GaussianPsf& psf, int q_max) {
  if (q_max < 0) throw ConfigError("hg_mode_probs: q_max must be >= 0");
  return probs_unchecked(geometry, psf, q_max);
}

ModalDistribution hg_mode_probs(const SceneGeometry& geometry,
                                const GaussianPsf& psf, int q_max) {
  if (q_max < 0) throw ConfigError("hg_mode_probs: q_max must be >= 0");
  ModalDistribution dist = probs_unchecked(geometry, psf, q_max);
  if (dist.tail_mass >= kTailTol) {
    throw ConvergenceError("modal distribution tail mass " +
                           std::to_string(dist.tail_mass) +
                           " not converged: increase q_max");
  }
  return dist;
}

Eigen::VectorXd hg_mode_prob_derivative(const SceneGeometry& geometry,
                                        const GaussianPsf& psf, int q_max,
                                        Param which) {
  if (q_max < 0) throw ConfigError("hg_mode_prob_derivative: q_max must be >= 0");
  return derivative_unchecked(geometry, psf, q_max, which);
}

double hg_spade_fisher_centroid(const SceneGeometry& geometry,
                                const GaussianPsf& psf,
                                const PhotonBudget& budget, int q_max) {
  return fisher_converged(geometry, psf, budget, q_max, Param::Theta1);
}

double hg_spade_fisher_separation(const SceneGeometry& geometry,
                                  const GaussianPsf& psf,
                                  const PhotonBudget& budget, int q_max) {
  return fisher_converged(geometry, psf, budget, q_max, Param::Theta2);
}

std::vector<ModeFiTerm> hg_mode_fi_terms(const SceneGeometry& geometry,
                                         const GaussianPsf& psf,
                                         const PhotonBudget& budget, int q_max,
                                         Param which) {
  const ModalDistribution dist = hg_mode_probs(geometry, psf, q_max);
  const Eigen::VectorXd d = hg_mode_prob_derivative(geometry, psf, q_max, which);
  std::vector<ModeFiTerm> terms;
  terms.reserve(static_cast<std::size_t>(q_max) + 1);
  for (int q = 0; q <= q_max; ++q) {
    const double p = dist.probs(q);
    const double term =
        p < kProbFloor ? 0.0 : budget.n_mean * d(q) * d(q) / p;
    terms.push_back({q, p, d(q), term});
  }
  return terms;
}

}  // namespace qloc
