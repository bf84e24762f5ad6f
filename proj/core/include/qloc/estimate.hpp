#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "qloc/qfi_sld.hpp"
#include "qloc/simulate.hpp"

namespace qloc {

/// Rectangular search region for the likelihood optimizers.
struct SearchBox {
  double theta1_lo = -6.0;
  double theta1_hi = 6.0;
  double theta2_lo = 0.0;
  double theta2_hi = 12.0;

  static SearchBox default_for(const GaussianPsf& psf) {
    return {-6.0 * psf.sigma, 6.0 * psf.sigma, 0.0, 12.0 * psf.sigma};
  }
};

struct MleOptions {
  bool estimate_theta2 = false;
  double fixed_theta2 = 0.0;  // used when estimate_theta2 is false
  int grid_points = 81;       // coarse grid per axis
  int max_refine_iters = 60;
};

struct EstimationResult {
  double theta1_hat = 0.0;
  double theta2_hat = 0.0;
  double loglik = 0.0;
  std::int64_t n_photons_used = 0;
  bool converged = false;
  bool on_boundary = false;     // maximizer pinned to the search box edge
  bool flat_curvature = false;  // model carries ~no information at the optimum
  double stderr_model = 0.0;    // 1/sqrt(n * FI_per_photon) at the estimate
};

/// Maximum-likelihood estimate from direct-imaging arrival positions.
/// Coarse grid then Newton refinement with analytic gradients; golden-section
/// fallback on theta1 when the Hessian is not negative definite.
EstimationResult mle_direct(const MeasurementBatch& batch,
                            const GaussianPsf& psf, const SearchBox& box,
                            const MleOptions& opts);

/// @brief Outcome-probability model p_q(theta) for modal batches.
/// Probability vectors have n_outcome_bins + 1 entries, tail/deficit last.
class ModalOutcomeModel {
public:
  virtual ~ModalOutcomeModel() = default;
  virtual int n_bins() const = 0;  // excluding the tail bin
  virtual const GaussianPsf& psf() const = 0;
  virtual Eigen::VectorXd probs(double theta1, double theta2) const = 0;
  virtual Eigen::VectorXd dprobs(double theta1, double theta2,
                                 Param which) const = 0;
};

/// HG mode-sorter outcome model for a fixed scene family (n points or line).
class HgOutcomeModel final : public ModalOutcomeModel {
public:
  HgOutcomeModel(const SceneGeometry& family, const GaussianPsf& psf,
                 int q_max);
  int n_bins() const override { return q_max_ + 1; }
  const GaussianPsf& psf() const override { return psf_; }
  Eigen::VectorXd probs(double theta1, double theta2) const override;
  Eigen::VectorXd dprobs(double theta1, double theta2,
                         Param which) const override;

private:
  SceneGeometry family_;
  GaussianPsf psf_;
  int q_max_;
};

/// SLD-eigenbasis outcome model; the measurement basis stays fixed while the
/// scene parameters vary.
class SldOutcomeModel final : public ModalOutcomeModel {
public:
  SldOutcomeModel(SldMeasurement measurement, const SceneGeometry& family);
  int n_bins() const override { return measurement_.dim(); }
  const GaussianPsf& psf() const override { return measurement_.psf; }
  Eigen::VectorXd probs(double theta1, double theta2) const override;
  Eigen::VectorXd dprobs(double theta1, double theta2,
                         Param which) const override;
  const SldMeasurement& measurement() const { return measurement_; }

private:
  SldMeasurement measurement_;
  SceneGeometry family_;
};

/// Maximum-likelihood estimate from modal outcome counts. Throws
/// NumericalError("model-data mismatch...") when an observed outcome has
/// zero probability everywhere in the box.
EstimationResult mle_modal(const MeasurementBatch& batch,
                           const ModalOutcomeModel& model,
                           const SearchBox& box, const MleOptions& opts);

/// @brief Two-stage receiver: spend ceil(N^alpha) photons (clamped below at
/// 100) on a direct-imaging pre-estimate, then measure the remainder in the
/// SLD eigenbasis evaluated at that estimate.
struct TwoStageConfig {
  double alpha = 0.5;
  double total_photons = 0.0;
  bool estimate_theta2 = false;
  double known_theta2 = 0.0;  // used when estimate_theta2 is false
  int q_max = kDefaultQMax;
  SearchBox box;
  int grid_points = 81;
};

struct StageTrace {
  std::int64_t photons = 0;
  double theta1_hat = 0.0;
  double theta2_hat = 0.0;
  double fisher_per_photon = 0.0;  // measurement FI at the stage estimate
};

struct TwoStageResult {
  EstimationResult final;  // stage-2 estimate
  StageTrace stage1;
  StageTrace stage2;
  bool stage1_ok = false;
};

TwoStageResult two_stage_adaptive(const TwoStageConfig& config,
                                  const SceneGeometry& true_geometry,
                                  const GaussianPsf& psf, std::uint64_t seed);

/// @brief Monte Carlo benchmark summary against a CRB/QCRB reference.
struct EfficiencySummary {
  int n_trials = 0;
  double mean = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double ratio = 0.0;  // variance * n_photons * reference_info_per_photon
  double ratio_ci_lo = 0.0;
  double ratio_ci_hi = 0.0;
};

/// Requires >= 30 trials. The CI is a seeded percentile bootstrap on the
/// variance ratio (lower edge floors at 0 when ties collapse the variance).
EfficiencySummary efficiency_report(const std::vector<EstimationResult>& trials,
                                    double true_theta1,
                                    double reference_info_per_photon,
                                    double n_photons,
                                    std::uint64_t bootstrap_seed = 0x9e2a,
                                    int bootstrap_rounds = 2000);

}  // namespace qloc
