// qloc command-line front end: Fisher/quantum-Fisher information for source
// localization scenes, figure-data sweeps, photon simulation, and the
// two-stage adaptive receiver. Exit codes: 0 success, 1 numerical failure,
// 2 config error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qloc/direct_imaging.hpp"
#include "qloc/estimate.hpp"
#include "qloc/hg_spade.hpp"
#include "qloc/qfi_sld.hpp"
#include "qloc/simulate.hpp"
#include "qloc/sweep.hpp"

namespace {

struct SceneArgs {
  double sigma = 1.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  int n_sources = 2;
  bool line = false;
  double photons = 1.0;
  int q_max = qloc::kDefaultQMax;
  std::string scene_file;
};

void add_scene_flags(CLI::App* cmd, SceneArgs& args) {
  cmd->add_option("--sigma", args.sigma, "PSF width (unit of length)");
  cmd->add_option("--theta1", args.theta1, "centroid, in sigma units");
  cmd->add_option("--theta2", args.theta2, "end-to-end extent, in sigma units");
  cmd->add_option("--n-sources", args.n_sources, "number of point sources");
  cmd->add_flag("--line", args.line, "continuum line source");
  cmd->add_option("--photons", args.photons, "mean detected photon number N");
  cmd->add_option("--q-max", args.q_max, "HG basis truncation");
  cmd->add_option("--scene", args.scene_file,
                  "JSON scene descriptor file (flags override nothing here; "
                  "the file wins)");
}

qloc::SceneSpec resolve_scene(const SceneArgs& args) {
  if (!args.scene_file.empty()) {
    std::ifstream in(args.scene_file);
    if (!in) throw qloc::ConfigError("cannot open scene file " + args.scene_file);
    std::stringstream buf;
    buf << in.rdbuf();
    return qloc::scene_from_json(buf.str());
  }
  qloc::SceneSpec spec;
  spec.psf = qloc::GaussianPsf(args.sigma);
  spec.budget = qloc::PhotonBudget(args.photons);
  spec.geometry = args.line
                      ? qloc::SceneGeometry::line(args.theta1, args.theta2)
                      : qloc::SceneGeometry::points(args.n_sources, args.theta1,
                                                    args.theta2);
  return spec;
}

void write_output(const std::string& path, const std::string& payload) {
  if (path.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qloc::ConfigError("cannot write output file " + path);
  out << payload;
}

std::string format_scalar_report(
    const std::vector<std::pair<std::string, double>>& values,
    const qloc::SceneSpec& scene, const std::string& format) {
  const double norm = scene.psf.sigma * scene.psf.sigma / scene.budget.n_mean;
  std::ostringstream out;
  out.precision(12);
  if (format == "json") {
    out << "{\n  \"units\": \"N_over_sigma2\",\n  \"sigma\": "
        << scene.psf.sigma << ",\n  \"N\": " << scene.budget.n_mean;
    for (const auto& [name, v] : values) {
      out << ",\n  \"" << name << "\": " << v * norm;
    }
    out << "\n}\n";
  } else {
    out << "# qloc_version=" << qloc::kQlocVersion << "\n# sigma="
        << scene.psf.sigma << "\n# N=" << scene.budget.n_mean
        << "\n# units=N_over_sigma2\nquantity,value\n";
    for (const auto& [name, v] : values) out << name << ',' << v * norm << '\n';
  }
  return out.str();
}

int run(int argc, char** argv) {
  CLI::App app{"Fisher and quantum Fisher information for localizing linear "
               "source arrays imaged through a Gaussian PSF"};
  app.require_subcommand(1);

  std::string out_path;
  std::string format = "csv";
  app.add_option("--out", out_path, "output file (default stdout)")
      ->configurable(false);
  app.add_option("--format", format, "csv|json")
      ->check(CLI::IsMember({"csv", "json"}));

  SceneArgs scene_args;

  auto* fisher = app.add_subcommand(
      "fisher", "direct-imaging Fisher information matrix");
  add_scene_flags(fisher, scene_args);

  auto* qfi = app.add_subcommand("qfi", "quantum Fisher information matrix");
  add_scene_flags(qfi, scene_args);

  auto* spade =
      app.add_subcommand("spade", "HG mode-sorter Fisher information");
  add_scene_flags(spade, scene_args);
  bool per_mode = false;
  spade->add_flag("--per-mode", per_mode,
                  "emit per-mode FI contributions (q, P(q), dP/dtheta1, term)");

  auto* sweep = app.add_subcommand("sweep", "parameter sweeps / figure data");
  add_scene_flags(sweep, scene_args);
  std::string preset;
  std::string variable = "theta2";
  double from = 0.05, to = 8.0;
  int points = 50;
  std::string outputs = "k11,j11_direct";
  sweep->add_option("--preset", preset, "fig1|fig2a|fig2b|fig3|fig4a|fig4b");
  sweep->add_option("--variable", variable, "theta2|theta1|n|q_max|N");
  sweep->add_option("--from", from, "grid start");
  sweep->add_option("--to", to, "grid end");
  sweep->add_option("--points", points, "grid size");
  sweep->add_option("--outputs", outputs, "comma-separated quantity names");

  auto* simulate = app.add_subcommand("simulate", "draw photon batches");
  add_scene_flags(simulate, scene_args);
  std::string sim_kind = "direct";
  std::uint64_t seed = 1;
  std::string count_mode = "exact";
  std::string binary_out;
  double ref_theta1 = 0.0, ref_theta2 = 0.0;
  bool have_ref1 = false, have_ref2 = false;
  simulate->add_option("--kind", sim_kind, "direct|hg|sld");
  simulate->add_option("--seed", seed, "RNG seed");
  simulate->add_option("--count-mode", count_mode, "exact|poisson");
  simulate->add_option("--binary-out", binary_out,
                       "also write the modal count-vector binary form");
  simulate->add_option("--ref-theta1", ref_theta1,
                       "SLD reference centroid (default: scene theta1)")
      ->each([&](const std::string&) { have_ref1 = true; });
  simulate->add_option("--ref-theta2", ref_theta2,
                       "SLD reference extent (default: scene theta2)")
      ->each([&](const std::string&) { have_ref2 = true; });

  auto* twostage =
      app.add_subcommand("two-stage", "Monte Carlo two-stage receiver");
  std::string config_path;
  std::string out_prefix = "twostage";
  std::optional<std::uint64_t> seed_override;
  twostage->add_option("--config", config_path, "experiment config JSON")
      ->required();
  twostage->add_option("--out-prefix", out_prefix,
                       "prefix for <prefix>_ledger.csv and <prefix>_summary.json");
  std::uint64_t seed_flag = 0;
  auto* seed_opt = twostage->add_option("--seed", seed_flag,
                                        "override the config seed");

  auto* diagnose =
      app.add_subcommand("diagnose", "truncation/quadrature convergence report");
  add_scene_flags(diagnose, scene_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fisher->parsed()) {
      const auto scene = resolve_scene(scene_args);
      const auto fm = qloc::direct_imaging_fisher(scene.geometry, scene.psf,
                                                  scene.budget);
      write_output(out_path,
                   format_scalar_report({{"j11_direct", fm.j11},
                                         {"j22_direct", fm.j22},
                                         {"j12_direct", fm.j12}},
                                        scene, format));
    } else if (qfi->parsed()) {
      const auto scene = resolve_scene(scene_args);
      const auto k = qloc::qfi_matrix(scene.geometry, scene.psf, scene.budget,
                                      scene_args.q_max);
      write_output(out_path, format_scalar_report(
                                 {{"k11", k.k11},
                                  {"k22", k.k22_defined ? k.k22 : 0.0},
                                  {"k12", k.k12}},
                                 scene, format));
      if (!k.k22_defined) {
        std::cerr << "note: k22 undefined for a single point source; "
                     "reported as 0\n";
      }
    } else if (spade->parsed()) {
      const auto scene = resolve_scene(scene_args);
      if (per_mode) {
        const auto terms = qloc::hg_mode_fi_terms(
            scene.geometry, scene.psf, scene.budget, scene_args.q_max,
            qloc::Param::Theta1);
        std::ostringstream os;
        os.precision(12);
        os << "q,P(q),dP_dtheta1,term\n";
        for (const auto& t : terms) {
          os << t.q << ',' << t.prob << ',' << t.dprob << ',' << t.term << '\n';
        }
        write_output(out_path, os.str());
      } else {
        const double j1 = qloc::hg_spade_fisher_centroid(
            scene.geometry, scene.psf, scene.budget, scene_args.q_max);
        const double j2 = qloc::hg_spade_fisher_separation(
            scene.geometry, scene.psf, scene.budget, scene_args.q_max);
        write_output(out_path,
                     format_scalar_report({{"j11_hg", j1}, {"j22_hg", j2}},
                                          scene, format));
      }
    } else if (sweep->parsed()) {
      qloc::SweepTable table;
      if (!preset.empty()) {
        table = qloc::preset_table(preset);
      } else {
        qloc::SweepSpec spec;
        spec.fixed = resolve_scene(scene_args);
        spec.q_max = scene_args.q_max;
        if (variable == "theta2") spec.variable = qloc::SweepVariable::Theta2;
        else if (variable == "theta1") spec.variable = qloc::SweepVariable::Theta1;
        else if (variable == "n") spec.variable = qloc::SweepVariable::NumSources;
        else if (variable == "q_max") spec.variable = qloc::SweepVariable::QMax;
        else if (variable == "N") spec.variable = qloc::SweepVariable::Photons;
        else throw qloc::ConfigError("unknown sweep variable " + variable);
        if (points < 2) throw qloc::ConfigError("--points must be >= 2");
        for (int i = 0; i < points; ++i) {
          spec.grid.push_back(from + (to - from) * i / (points - 1));
        }
        std::stringstream names(outputs);
        std::string name;
        while (std::getline(names, name, ',')) spec.outputs.push_back(name);
        table = qloc::run_sweep(spec);
      }
      write_output(out_path, format == "json" ? qloc::table_to_json(table)
                                              : qloc::table_to_csv(table));
    } else if (simulate->parsed()) {
      const auto scene = resolve_scene(scene_args);
      const auto mode = count_mode == "poisson" ? qloc::CountMode::PoissonN
                                                : qloc::CountMode::ExactN;
      qloc::MeasurementBatch batch;
      if (sim_kind == "direct") {
        batch = qloc::sample_direct(scene.geometry, scene.psf,
                                    scene.budget.n_mean, seed, mode);
      } else if (sim_kind == "hg") {
        const auto dist = qloc::hg_mode_probs(scene.geometry, scene.psf,
                                              scene_args.q_max);
        batch = qloc::sample_modes(dist, scene.geometry, scene.psf,
                                   scene.budget.n_mean, seed, mode);
      } else if (sim_kind == "sld") {
        const auto ref = scene.geometry.is_line()
                             ? qloc::SceneGeometry::line(
                                   have_ref1 ? ref_theta1 : scene.geometry.theta1,
                                   have_ref2 ? ref_theta2 : scene.geometry.theta2)
                             : qloc::SceneGeometry::points(
                                   scene.geometry.n,
                                   have_ref1 ? ref_theta1 : scene.geometry.theta1,
                                   have_ref2 ? ref_theta2 : scene.geometry.theta2);
        const auto meas =
            qloc::sld_measurement(ref, scene.psf, scene_args.q_max);
        batch = qloc::sample_sld(meas, scene.geometry, scene.budget.n_mean,
                                 seed, mode);
      } else {
        throw qloc::ConfigError("unknown --kind " + sim_kind);
      }
      write_output(out_path, qloc::batch_to_csv(batch));
      if (!binary_out.empty()) {
        const auto blob = qloc::batch_to_count_binary(batch);
        std::ofstream bin(binary_out, std::ios::binary);
        if (!bin) {
          throw qloc::ConfigError("cannot write binary file " + binary_out);
        }
        bin.write(reinterpret_cast<const char*>(blob.data()),
                  static_cast<std::streamsize>(blob.size()));
      }
    } else if (twostage->parsed()) {
      std::ifstream in(config_path);
      if (!in) throw qloc::ConfigError("cannot open config file " + config_path);
      std::stringstream buf;
      buf << in.rdbuf();
      auto config = qloc::twostage_config_from_json(buf.str());
      if (seed_opt->count() > 0) config.seed = seed_flag;
      const auto experiment = qloc::run_twostage_experiment(config);
      write_output(out_prefix + "_ledger.csv", qloc::ledger_to_csv(experiment));
      write_output(out_prefix + "_summary.json",
                   qloc::summary_to_json(experiment));
      std::cerr << "wrote " << out_prefix << "_ledger.csv and " << out_prefix
                << "_summary.json\n";
    } else if (diagnose->parsed()) {
      const auto scene = resolve_scene(scene_args);
      const auto report = qloc::diagnose_convergence(scene);
      write_output(out_path, format == "json"
                                 ? qloc::convergence_report_to_json(report)
                                 : qloc::convergence_report_to_text(report));
    }
  } catch (const qloc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const qloc::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
