#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qloc/estimate.hpp"
#include "qloc/scene.hpp"

namespace qloc {

inline constexpr const char* kQlocVersion = "0.1.0";

enum class SweepVariable { Theta2, Theta1, NumSources, QMax, Alpha, Photons };

/// @brief One-variable parameter sweep. Information columns are emitted
/// dimensionless, in N/sigma^2 units (sigma and N echoed in the metadata),
/// matching the figure axes throughout.
struct SweepSpec {
  SweepVariable variable = SweepVariable::Theta2;
  std::vector<double> grid;  // non-empty, strictly monotone
  SceneSpec fixed;
  int q_max = kDefaultQMax;
  std::vector<std::string> outputs;
};

/// Published quantity registry for SweepSpec::outputs.
const std::vector<std::string>& sweep_quantity_names();

struct SweepTable {
  std::vector<std::string> columns;        // first column is the swept variable
  std::vector<std::vector<double>> rows;   // NaN cells where a row failed
  std::vector<std::string> row_errors;     // per-row error string, empty if ok
  std::vector<std::string> metadata;       // key=value lines for the CSV header
};

/// One row per grid point, one column per requested quantity; a module error
/// aborts the row, records the message, and the sweep continues. Rows are
/// evaluated in parallel and emitted in grid order.
SweepTable run_sweep(const SweepSpec& spec);

/// Figure-data presets: fig1, fig2a, fig2b, fig3, fig4a, fig4b.
/// Deterministic grids; output is reproducible bit-exactly for a given
/// preset name and version string.
SweepTable preset_table(const std::string& name);

std::string table_to_csv(const SweepTable& table);
std::string table_to_json(const SweepTable& table);

/// @brief Truncation/quadrature convergence diagnostics for one scene.
struct ConvergenceRow {
  int q_max = 0;
  double k11 = 0.0;          // N/sigma^2 units
  double j11_hg = 0.0;       // N/sigma^2 units
  double trace_deficit = 0.0;
  bool deficit_ok = false;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;  // q_max in {25, 50, 100, 200}
  double quadrature_error = 0.0;     // direct-imaging FI error estimate
  int quadrature_panels = 0;
  std::string recommendation;        // non-empty if q_max=50 is insufficient
};

ConvergenceReport diagnose_convergence(const SceneSpec& scene);

std::string convergence_report_to_json(const ConvergenceReport& report);
std::string convergence_report_to_text(const ConvergenceReport& report);

/// @brief Config for a Monte Carlo two-stage experiment; parses the JSON
/// schema in the docs. Missing fields raise ConfigError naming the field.
struct TwoStageExperimentConfig {
  SceneSpec scene;          // n_photons = total photon budget N per trial
  double alpha = 0.5;
  int trials = 0;
  std::uint64_t seed = 0;
  bool estimate_theta2 = false;
  int q_max = kDefaultQMax;
  SearchBox box;
};

TwoStageExperimentConfig twostage_config_from_json(const std::string& text);

struct TrialRecord {
  int trial_id = 0;
  std::uint64_t seed = 0;
  double n_photons = 0.0;
  double alpha = 0.0;
  double stage1_theta1 = 0.0;
  double stage1_theta2 = 0.0;
  double final_theta1 = 0.0;
  double final_theta2 = 0.0;
  double loglik = 0.0;
  bool converged = false;
};

struct TwoStageExperiment {
  std::vector<TrialRecord> ledger;
  EfficiencySummary summary;   // variance ratio against N * k11
  double k11_per_photon = 0.0;
};

/// Runs config.trials independent two-stage receivers with per-trial derived
/// seeds (parallel; output order is by trial id).
TwoStageExperiment run_twostage_experiment(const TwoStageExperimentConfig& c);

std::string ledger_to_csv(const TwoStageExperiment& experiment);
std::string summary_to_json(const TwoStageExperiment& experiment);

}  // namespace qloc
