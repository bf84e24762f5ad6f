#include "qloc/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>
#if defined(QLOC_HAVE_PAR_STL)
#include <execution>
#endif

#include "hg_kernels.hpp"
#include "qloc/direct_imaging.hpp"
#include "qloc/hg_spade.hpp"
#include "qloc/qfi_sld.hpp"
#include "qloc/rng.hpp"

namespace qloc {

namespace {

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

// Dimensionless value of an information quantity in N/sigma^2 units.
double normalized(double info, const SceneSpec& s) {
  return info * s.psf.sigma * s.psf.sigma / s.budget.n_mean;
}

using QuantityFn = std::function<double(const SceneSpec&, int q_max)>;

const std::map<std::string, QuantityFn>& quantity_registry() {
  static const std::map<std::string, QuantityFn> registry = {
      {"j11_direct",
       [](const SceneSpec& s, int) {
         return normalized(
             direct_imaging_fisher(s.geometry, s.psf, s.budget).j11, s);
       }},
      {"j22_direct",
       [](const SceneSpec& s, int) {
         return normalized(
             direct_imaging_fisher(s.geometry, s.psf, s.budget).j22, s);
       }},
      {"j12_direct",
       [](const SceneSpec& s, int) {
         return normalized(
             direct_imaging_fisher(s.geometry, s.psf, s.budget).j12, s);
       }},
      {"k11",
       [](const SceneSpec& s, int q) {
         return normalized(qfi_matrix(s.geometry, s.psf, s.budget, q).k11, s);
       }},
      {"k22",
       [](const SceneSpec& s, int q) {
         return normalized(qfi_matrix(s.geometry, s.psf, s.budget, q).k22, s);
       }},
      {"k12",
       [](const SceneSpec& s, int q) {
         return normalized(qfi_matrix(s.geometry, s.psf, s.budget, q).k12, s);
       }},
      {"j11_hg",
       [](const SceneSpec& s, int q) {
         return normalized(
             hg_spade_fisher_centroid(s.geometry, s.psf, s.budget, q), s);
       }},
      {"j22_hg",
       [](const SceneSpec& s, int q) {
         return normalized(
             hg_spade_fisher_separation(s.geometry, s.psf, s.budget, q), s);
       }},
      {"ratio_j11_k11",
       [](const SceneSpec& s, int q) {
         const double j =
             direct_imaging_fisher(s.geometry, s.psf, s.budget).j11;
         const double k = qfi_matrix(s.geometry, s.psf, s.budget, q).k11;
         return j / k;
       }},
      {"theta2_times_k11",
       [](const SceneSpec& s, int q) {
         return (s.geometry.theta2 / s.psf.sigma) *
                normalized(qfi_matrix(s.geometry, s.psf, s.budget, q).k11, s);
       }},
      {"theta2_times_j11_direct",
       [](const SceneSpec& s, int) {
         return (s.geometry.theta2 / s.psf.sigma) *
                normalized(
                    direct_imaging_fisher(s.geometry, s.psf, s.budget).j11, s);
       }},
  };
  return registry;
}

const char* variable_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::Theta2: return "theta2";
    case SweepVariable::Theta1: return "theta1";
    case SweepVariable::NumSources: return "n";
    case SweepVariable::QMax: return "q_max";
    case SweepVariable::Alpha: return "alpha";
    case SweepVariable::Photons: return "N";
  }
  return "?";
}

struct GridPoint {
  SceneSpec scene;
  int q_max;
};

GridPoint apply_variable(const SweepSpec& spec, double v) {
  GridPoint p{spec.fixed, spec.q_max};
  auto& g = p.scene.geometry;
  switch (spec.variable) {
    case SweepVariable::Theta2:
      g = g.is_line() ? SceneGeometry::line(g.theta1, v)
                      : SceneGeometry::points(g.n, g.theta1, v);
      break;
    case SweepVariable::Theta1:
      g = g.is_line() ? SceneGeometry::line(v, g.theta2)
                      : SceneGeometry::points(g.n, v, g.theta2);
      break;
    case SweepVariable::NumSources:
      g = SceneGeometry::points(static_cast<int>(v), g.theta1, g.theta2);
      break;
    case SweepVariable::QMax:
      p.q_max = static_cast<int>(v);
      break;
    case SweepVariable::Photons:
      p.scene.budget = PhotonBudget(v);
      break;
    case SweepVariable::Alpha:
      break;  // only two-stage experiments consume alpha
  }
  return p;
}

template <class Fn>
void parallel_for_index(std::size_t count, Fn&& fn) {
#if defined(QLOC_HAVE_PAR_STL)
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::for_each(std::execution::par, idx.begin(), idx.end(), fn);
#else
  for (std::size_t i = 0; i < count; ++i) fn(i);
#endif
}

void append_formatted(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

const std::vector<std::string>& sweep_quantity_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : quantity_registry()) out.push_back(name);
    return out;
  }();
  return names;
}

SweepTable run_sweep(const SweepSpec& spec) {
  if (spec.grid.empty()) throw ConfigError("run_sweep: empty grid");
  for (std::size_t i = 1; i < spec.grid.size(); ++i) {
    if (!(spec.grid[i] > spec.grid[i - 1]) &&
        !(spec.grid[i] < spec.grid[i - 1])) {
      throw ConfigError("run_sweep: grid must be strictly monotone");
    }
    if (i > 1 && (spec.grid[i] > spec.grid[i - 1]) !=
                     (spec.grid[1] > spec.grid[0])) {
      throw ConfigError("run_sweep: grid must be strictly monotone");
    }
  }
  if (spec.outputs.empty()) throw ConfigError("run_sweep: no output quantities");
  const auto& registry = quantity_registry();
  for (const auto& name : spec.outputs) {
    if (registry.find(name) == registry.end()) {
      throw ConfigError("run_sweep: unknown quantity \"" + name + "\"");
    }
  }

  SweepTable table;
  table.columns.push_back(variable_name(spec.variable));
  for (const auto& name : spec.outputs) table.columns.push_back(name);
  table.metadata.push_back(std::string("qloc_version=") + kQlocVersion);
  table.metadata.push_back("sigma=" + std::to_string(spec.fixed.psf.sigma));
  table.metadata.push_back("N=" + std::to_string(spec.fixed.budget.n_mean));
  table.metadata.push_back("units=N_over_sigma2");

  table.rows.assign(spec.grid.size(),
                    std::vector<double>(table.columns.size(), nan_value()));
  table.row_errors.assign(spec.grid.size(), "");

  parallel_for_index(spec.grid.size(), [&](std::size_t i) {
    auto& row = table.rows[i];
    row[0] = spec.grid[i];
    try {
      const GridPoint p = apply_variable(spec, spec.grid[i]);
      for (std::size_t c = 0; c < spec.outputs.size(); ++c) {
        row[c + 1] = registry.at(spec.outputs[c])(p.scene, p.q_max);
      }
    } catch (const std::exception& e) {
      table.row_errors[i] = e.what();
    }
  });
  return table;
}

namespace {

std::vector<double> linear_grid(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return g;
}

std::vector<double> geometric_grid(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  const double r = std::log(hi / lo);
  for (int i = 0; i < n; ++i) {
    g[static_cast<std::size_t>(i)] = lo * std::exp(r * i / (n - 1));
  }
  return g;
}

SceneSpec unit_scene(const SceneGeometry& g) {
  SceneSpec s;
  s.geometry = g;
  s.psf = GaussianPsf(1.0);
  s.budget = PhotonBudget(1.0);
  return s;
}

// Merge several single-scene sweeps over a common grid into labeled columns.
SweepTable merge_sweeps(const std::vector<double>& grid,
                        const std::vector<std::pair<std::string, SweepSpec>>&
                            labeled) {
  SweepTable out;
  out.columns.push_back("theta2");
  out.rows.assign(grid.size(), {});
  for (std::size_t i = 0; i < grid.size(); ++i) out.rows[i].push_back(grid[i]);
  out.row_errors.assign(grid.size(), "");

  bool first = true;
  for (const auto& [label, spec] : labeled) {
    const SweepTable t = run_sweep(spec);
    if (first) {
      out.metadata = t.metadata;
      first = false;
    }
    for (std::size_t c = 1; c < t.columns.size(); ++c) {
      out.columns.push_back(t.columns[c] + "_" + label);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        out.rows[i].push_back(t.rows[i][c]);
        if (!t.row_errors[i].empty() && out.row_errors[i].empty()) {
          out.row_errors[i] = t.row_errors[i];
        }
      }
    }
  }
  return out;
}

}  // namespace

SweepTable preset_table(const std::string& name) {
  const std::vector<int> caption_n = {2, 3, 4, 6};

  auto sweep_for = [](const SceneGeometry& g, const std::vector<double>& grid,
                      std::vector<std::string> outputs) {
    SweepSpec s;
    s.variable = SweepVariable::Theta2;
    s.grid = grid;
    s.fixed = unit_scene(g);
    s.outputs = std::move(outputs);
    return s;
  };

  if (name == "fig1") {
    const auto grid = linear_grid(0.05, 8.0, 80);
    SweepTable t = merge_sweeps(
        grid, {{"n2", sweep_for(SceneGeometry::points(2, 0.0, 1.0), grid,
                                {"k22", "j22_direct"})},
               {"line", sweep_for(SceneGeometry::line(0.0, 1.0), grid,
                                  {"k22", "j22_direct"})}});
    t.metadata.push_back("preset=fig1");
    return t;
  }
  if (name == "fig2a") {
    const auto grid = linear_grid(0.05, 8.0, 80);
    std::vector<std::pair<std::string, SweepSpec>> parts;
    for (int n : caption_n) {
      parts.emplace_back("n" + std::to_string(n),
                         sweep_for(SceneGeometry::points(n, 0.0, 1.0), grid,
                                   {"k11", "j11_direct"}));
    }
    parts.emplace_back("line", sweep_for(SceneGeometry::line(0.0, 1.0), grid,
                                         {"k11", "j11_direct"}));
    SweepTable t = merge_sweeps(grid, parts);
    t.metadata.push_back("preset=fig2a");
    return t;
  }
  if (name == "fig2b") {
    const auto grid = geometric_grid(2.0, 40.0, 40);
    SweepTable t = merge_sweeps(
        grid, {{"line", sweep_for(SceneGeometry::line(0.0, 1.0), grid,
                                  {"theta2_times_k11",
                                   "theta2_times_j11_direct"})}});
    t.metadata.push_back("preset=fig2b");
    return t;
  }
  if (name == "fig3") {
    const auto grid = linear_grid(0.05, 12.0, 120);
    std::vector<std::pair<std::string, SweepSpec>> parts;
    for (int n : caption_n) {
      parts.emplace_back("n" + std::to_string(n),
                         sweep_for(SceneGeometry::points(n, 0.0, 1.0), grid,
                                   {"ratio_j11_k11"}));
    }
    parts.emplace_back("line", sweep_for(SceneGeometry::line(0.0, 1.0), grid,
                                         {"ratio_j11_k11"}));
    SweepTable t = merge_sweeps(grid, parts);
    t.metadata.push_back("preset=fig3");
    return t;
  }
  if (name == "fig4a" || name == "fig4b") {
    const auto grid = linear_grid(0.05, 8.0, 80);
    auto geom = [&](double theta1) {
      return name == "fig4a" ? SceneGeometry::points(2, theta1, 1.0)
                             : SceneGeometry::line(theta1, 1.0);
    };
    std::vector<std::pair<std::string, SweepSpec>> parts;
    parts.emplace_back("t1_0.5", sweep_for(geom(0.5), grid, {"j11_hg"}));
    parts.emplace_back("t1_1", sweep_for(geom(1.0), grid, {"j11_hg"}));
    parts.emplace_back("t1_2", sweep_for(geom(2.0), grid, {"j11_hg"}));
    parts.emplace_back("ref",
                       sweep_for(geom(0.0), grid, {"k11", "j11_direct"}));
    SweepTable t = merge_sweeps(grid, parts);
    t.metadata.push_back("preset=" + name);
    return t;
  }
  throw ConfigError("unknown preset \"" + name +
                    "\" (expected fig1|fig2a|fig2b|fig3|fig4a|fig4b)");
}

std::string table_to_csv(const SweepTable& table) {
  std::string out;
  for (const auto& m : table.metadata) out += "# " + m + "\n";
  const bool any_error = std::any_of(table.row_errors.begin(),
                                     table.row_errors.end(),
                                     [](const std::string& e) { return !e.empty(); });
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    out += table.columns[c];
    if (c + 1 < table.columns.size()) out += ',';
  }
  if (any_error) out += ",error";
  out += '\n';
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (std::size_t c = 0; c < table.rows[i].size(); ++c) {
      append_formatted(out, table.rows[i][c]);
      if (c + 1 < table.rows[i].size()) out += ',';
    }
    if (any_error) {
      out += ",\"" + table.row_errors[i] + "\"";
    }
    out += '\n';
  }
  return out;
}

std::string table_to_json(const SweepTable& table) {
  nlohmann::json j;
  j["metadata"] = table.metadata;
  j["columns"] = table.columns;
  j["rows"] = table.rows;
  j["row_errors"] = table.row_errors;
  return j.dump(2);
}

ConvergenceReport diagnose_convergence(const SceneSpec& scene) {
  ConvergenceReport report;
  const bool single_point = !scene.geometry.is_line() && scene.geometry.n == 1;

  for (int q : {25, 50, 100, 200}) {
    ConvergenceRow row;
    row.q_max = q;
    try {
      const HgOperator rho = rho1_hg_unchecked(scene.geometry, scene.psf, q);
      row.trace_deficit = 1.0 - rho.trace();
      row.deficit_ok = row.trace_deficit < kTruncTol;
      row.k11 = normalized(
          qfi_matrix_fixed(scene.geometry, scene.psf, scene.budget, q).k11,
          scene);
      // Fixed-q_max SPADE FI (no doubling) to show the truncation trend.
      const ModalDistribution dist =
          hg_mode_probs_unchecked(scene.geometry, scene.psf, q);
      const Eigen::VectorXd d =
          hg_mode_prob_derivative(scene.geometry, scene.psf, q, Param::Theta1);
      double fi = 0.0;
      for (int i = 0; i <= q; ++i) {
        if (dist.probs(i) >= 1e-300) fi += d(i) * d(i) / dist.probs(i);
      }
      row.j11_hg = normalized(scene.budget.n_mean * fi, scene);
    } catch (const std::exception&) {
      row.k11 = nan_value();
      row.j11_hg = nan_value();
      row.trace_deficit = nan_value();
      row.deficit_ok = false;
    }
    report.rows.push_back(row);
  }

  QuadratureInfo info;
  try {
    direct_imaging_fisher(scene.geometry, scene.psf, scene.budget, {}, &info);
    report.quadrature_error = info.error_estimate;
    report.quadrature_panels = info.panels;
  } catch (const QuadratureError& e) {
    report.quadrature_error = e.achieved_error;
    report.quadrature_panels = 0;
  }

  if (single_point) {
    report.recommendation = "";  // exact at q_max = 2 already
  } else {
    const auto& r50 = report.rows[1];
    if (!r50.deficit_ok) {
      // Estimate a sufficient q_max from the largest mode mean in the scene.
      const double edge =
          std::abs(scene.geometry.theta1) + 0.5 * scene.geometry.theta2;
      const double qmean = edge * edge / (4.0 * scene.psf.sigma * scene.psf.sigma);
      const int suggest = static_cast<int>(
          std::ceil((qmean + 8.0 * std::sqrt(qmean + 1.0) + 16.0) / 32.0) * 32);
      report.recommendation =
          "q_max=50 insufficient (trace deficit " +
          std::to_string(r50.trace_deficit) + "); use q_max >= " +
          std::to_string(suggest);
    }
  }
  return report;
}

std::string convergence_report_to_json(const ConvergenceReport& report) {
  nlohmann::json j;
  j["quadrature_error"] = report.quadrature_error;
  j["quadrature_panels"] = report.quadrature_panels;
  j["recommendation"] = report.recommendation;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) {
    j["rows"].push_back({{"q_max", r.q_max},
                         {"k11", r.k11},
                         {"j11_hg", r.j11_hg},
                         {"trace_deficit", r.trace_deficit},
                         {"deficit_ok", r.deficit_ok}});
  }
  return j.dump(2);
}

std::string convergence_report_to_text(const ConvergenceReport& report) {
  std::ostringstream out;
  out << "q_max    k11[N/s^2]      j11_hg[N/s^2]   trace_deficit  ok\n";
  for (const auto& r : report.rows) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-8d %-15.10g %-15.10g %-14.3g %s\n",
                  r.q_max, r.k11, r.j11_hg, r.trace_deficit,
                  r.deficit_ok ? "yes" : "NO");
    out << line;
  }
  out << "direct-imaging quadrature: error estimate " << report.quadrature_error
      << " over " << report.quadrature_panels << " panels\n";
  if (!report.recommendation.empty()) {
    out << "recommendation: " << report.recommendation << "\n";
  }
  return out.str();
}

TwoStageExperimentConfig twostage_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("two-stage config: invalid JSON: ") + e.what());
  }
  auto require = [&](const char* field) -> const nlohmann::json& {
    if (!j.contains(field)) {
      throw ConfigError(std::string("two-stage config: missing field \"") +
                        field + "\"");
    }
    return j.at(field);
  };

  TwoStageExperimentConfig c;
  c.scene = scene_from_json(require("scene").dump());
  const auto& alpha = require("alpha");
  if (!alpha.is_number()) {
    throw ConfigError("two-stage config: field \"alpha\" must be a number");
  }
  c.alpha = alpha.get<double>();
  const auto& trials = require("trials");
  if (!trials.is_number_integer()) {
    throw ConfigError("two-stage config: field \"trials\" must be an integer");
  }
  c.trials = trials.get<int>();
  const auto& seed = require("seed");
  if (!seed.is_number()) {
    throw ConfigError("two-stage config: field \"seed\" must be a number");
  }
  c.seed = seed.get<std::uint64_t>();
  if (j.contains("estimate_theta2")) {
    c.estimate_theta2 = j.at("estimate_theta2").get<bool>();
  }
  if (j.contains("q_max")) c.q_max = j.at("q_max").get<int>();
  c.box = SearchBox::default_for(c.scene.psf);
  if (j.contains("search_box")) {
    const auto& b = j.at("search_box");
    for (const char* f : {"theta1_lo", "theta1_hi", "theta2_lo", "theta2_hi"}) {
      if (!b.contains(f)) {
        throw ConfigError(
            std::string("two-stage config: search_box missing field \"") + f +
            "\"");
      }
    }
    c.box = {b.at("theta1_lo").get<double>(), b.at("theta1_hi").get<double>(),
             b.at("theta2_lo").get<double>(), b.at("theta2_hi").get<double>()};
  }
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) {
    throw ConfigError("two-stage config: alpha must be in (0, 1)");
  }
  if (c.trials < 1) {
    throw ConfigError("two-stage config: trials must be >= 1");
  }
  return c;
}

TwoStageExperiment run_twostage_experiment(const TwoStageExperimentConfig& c) {
  TwoStageExperiment out;
  out.k11_per_photon =
      qfi_matrix(c.scene.geometry, c.scene.psf, PhotonBudget(1.0), c.q_max).k11;

  TwoStageConfig tsc;
  tsc.alpha = c.alpha;
  tsc.total_photons = c.scene.budget.n_mean;
  tsc.estimate_theta2 = c.estimate_theta2;
  tsc.known_theta2 = c.scene.geometry.theta2;
  tsc.q_max = c.q_max;
  tsc.box = c.box;

  out.ledger.assign(static_cast<std::size_t>(c.trials), {});
  std::vector<EstimationResult> finals(static_cast<std::size_t>(c.trials));

  parallel_for_index(static_cast<std::size_t>(c.trials), [&](std::size_t i) {
    SplitMix64 mix(c.seed + 0x51ED270B * static_cast<std::uint64_t>(i + 1));
    const std::uint64_t trial_seed = mix.next();
    const TwoStageResult r =
        two_stage_adaptive(tsc, c.scene.geometry, c.scene.psf, trial_seed);
    TrialRecord& rec = out.ledger[i];
    rec.trial_id = static_cast<int>(i);
    rec.seed = trial_seed;
    rec.n_photons = c.scene.budget.n_mean;
    rec.alpha = c.alpha;
    rec.stage1_theta1 = r.stage1.theta1_hat;
    rec.stage1_theta2 = r.stage1.theta2_hat;
    rec.final_theta1 = r.final.theta1_hat;
    rec.final_theta2 = r.final.theta2_hat;
    rec.loglik = r.final.loglik;
    rec.converged = r.stage1_ok && r.final.converged;
    finals[i] = r.final;
  });

  out.summary = efficiency_report(finals, c.scene.geometry.theta1,
                                  out.k11_per_photon, c.scene.budget.n_mean,
                                  c.seed ^ 0xB00757A9);
  return out;
}

std::string ledger_to_csv(const TwoStageExperiment& experiment) {
  std::string out =
      "trial_id,seed,N,alpha,stage1_theta1,stage1_theta2,final_theta1,"
      "final_theta2,loglik,converged\n";
  for (const auto& r : experiment.ledger) {
    out += std::to_string(r.trial_id) + ',' + std::to_string(r.seed) + ',';
    append_formatted(out, r.n_photons);
    out += ',';
    append_formatted(out, r.alpha);
    out += ',';
    append_formatted(out, r.stage1_theta1);
    out += ',';
    append_formatted(out, r.stage1_theta2);
    out += ',';
    append_formatted(out, r.final_theta1);
    out += ',';
    append_formatted(out, r.final_theta2);
    out += ',';
    append_formatted(out, r.loglik);
    out += ',';
    out += r.converged ? "1" : "0";
    out += '\n';
  }
  return out;
}

std::string summary_to_json(const TwoStageExperiment& experiment) {
  const auto& s = experiment.summary;
  nlohmann::json j;
  j["n_trials"] = s.n_trials;
  j["mean"] = s.mean;
  j["bias"] = s.bias;
  j["variance"] = s.variance;
  j["variance_ratio_vs_qcrb"] = s.ratio;
  j["ratio_ci_95"] = {s.ratio_ci_lo, s.ratio_ci_hi};
  j["k11_per_photon"] = experiment.k11_per_photon;
  return j.dump(2);
}

}  // namespace qloc
