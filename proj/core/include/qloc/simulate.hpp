#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qloc/hg_spade.hpp"
#include "qloc/qfi_sld.hpp"
#include "qloc/scene.hpp"

namespace qloc {

enum class MeasurementKind { DirectImaging, HgSpade, SldBasis };

/// Photon-count convention: draw exactly N outcomes, or a Poisson(N) number.
/// Fisher-information comparisons use ExactN.
enum class CountMode { ExactN, PoissonN };

/// @brief Simulated detection record: photon arrival positions (direct
/// imaging) or outcome indices (modal measurements), with full seed
/// provenance. Replaying the same (seed, scene, kind, n) is bit-exact.
struct MeasurementBatch {
  MeasurementKind kind = MeasurementKind::DirectImaging;
  CountMode count_mode = CountMode::ExactN;
  std::vector<double> positions;  // direct imaging outcomes, in PSF units
  std::vector<int> indices;       // modal outcomes; tail/deficit = n_outcome_bins
  int n_outcome_bins = 0;         // regular modal bins (excludes the tail index)
  std::int64_t n_photons_drawn = 0;
  double intended_photons = 0.0;
  std::uint64_t seed = 0;
  SceneGeometry scene;
  GaussianPsf psf;
  std::string rng_algorithm;

  /// Outcome counts over the n_outcome_bins + 1 modal bins.
  std::vector<std::int64_t> counts() const;
};

/// i.i.d. draws from the arrival density: pick a source (or a point on the
/// line) uniformly, then add Gaussian PSF blur. Exact sampling.
MeasurementBatch sample_direct(const SceneGeometry& geometry,
                               const GaussianPsf& psf, double n_photons,
                               std::uint64_t seed,
                               CountMode mode = CountMode::ExactN);

/// Categorical draws from a converged modal distribution; the tail mass is
/// drawn as outcome index q_max + 1 and recorded for exclusion downstream.
MeasurementBatch sample_modes(const ModalDistribution& distribution,
                              const SceneGeometry& geometry,
                              const GaussianPsf& psf, double n_photons,
                              std::uint64_t seed,
                              CountMode mode = CountMode::ExactN);

/// Categorical draws over SLD-eigenbasis outcomes (+ truncation-deficit
/// outcome) under the true scene.
MeasurementBatch sample_sld(const SldMeasurement& measurement,
                            const SceneGeometry& true_geometry,
                            double n_photons, std::uint64_t seed,
                            CountMode mode = CountMode::ExactN);

/// CSV form: a metadata header (kind, seed, n, sigma, theta1, theta2) then
/// one outcome per row.
std::string batch_to_csv(const MeasurementBatch& batch);
MeasurementBatch batch_from_csv(const std::string& text);

/// Compact binary count-vector form for modal batches (little-endian,
/// magic "QLCB"). Rejects direct-imaging batches.
std::vector<std::uint8_t> batch_to_count_binary(const MeasurementBatch& batch);

/// Decoded count-vector batch: per-bin counts instead of an outcome list.
struct CountVectorBatch {
  MeasurementKind kind = MeasurementKind::HgSpade;
  std::uint64_t seed = 0;
  std::int64_t n_photons = 0;
  double sigma = 1.0, theta1 = 0.0, theta2 = 0.0;
  std::vector<std::int64_t> counts;  // size n_outcome_bins + 1 (tail last)
};
CountVectorBatch batch_from_count_binary(const std::vector<std::uint8_t>& blob);

}  // namespace qloc
