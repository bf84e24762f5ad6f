#pragma once

#include <vector>

#include <Eigen/Core>

#include "qloc/scene.hpp"

namespace qloc {

enum class Param { Theta1, Theta2 };

inline constexpr int kDefaultQMax = 50;
inline constexpr double kTailTol = 1e-10;

/// @brief Outcome distribution of a Hermite-Gaussian mode sorter whose axis
/// sits at x = 0 (misalignment is encoded by theta1 != 0).
struct ModalDistribution {
  Eigen::VectorXd probs;  // P(q), q = 0..q_max
  double tail_mass = 0.0;

  int q_max() const { return static_cast<int>(probs.size()) - 1; }
};

/// Mode probabilities P(q) = (1/n) sum_s exp(-Q_s) Q_s^q / q! with
/// Q_s = x_s^2 / (4 sigma^2); the line replaces the sum by an integral over
/// the segment (adaptive quadrature). Throws ConvergenceError("increase
/// q_max") when the tail mass beyond q_max is not below kTailTol.
ModalDistribution hg_mode_probs(const SceneGeometry& geometry,
                                const GaussianPsf& psf, int q_max);

/// Same without the tail-convergence check. Likelihood scans and convergence
/// diagnostics need distributions at parameter points where the truncated
/// basis is not (yet) adequate.
ModalDistribution hg_mode_probs_unchecked(const SceneGeometry& geometry,
                                          const GaussianPsf& psf, int q_max);

/// Analytic dP(q)/dtheta; mirrored sources are accumulated pairwise so the
/// aligned (theta1 = 0) centroid derivative cancels to exactly zero.
Eigen::VectorXd hg_mode_prob_derivative(const SceneGeometry& geometry,
                                        const GaussianPsf& psf, int q_max,
                                        Param which);

/// SPADE Fisher information for the centroid,
/// J = N sum_q (dP(q)/dtheta1)^2 / P(q).
/// Doubles q_max until the sum changes by < 1e-8 relative.
double hg_spade_fisher_centroid(const SceneGeometry& geometry,
                                const GaussianPsf& psf,
                                const PhotonBudget& budget,
                                int q_max = kDefaultQMax);

/// Same with d/dtheta2: the separation information of the mode sorter.
double hg_spade_fisher_separation(const SceneGeometry& geometry,
                                  const GaussianPsf& psf,
                                  const PhotonBudget& budget,
                                  int q_max = kDefaultQMax);

/// Per-mode breakdown (q, P(q), dP/dtheta, N-scaled FI term) for reporting.
struct ModeFiTerm {
  int q;
  double prob;
  double dprob;
  double term;
};

std::vector<ModeFiTerm> hg_mode_fi_terms(const SceneGeometry& geometry,
                                         const GaussianPsf& psf,
                                         const PhotonBudget& budget, int q_max,
                                         Param which);

}  // namespace qloc
