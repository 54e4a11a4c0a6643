// Command-line driver for the torus Monge-Ampere laboratory.
//
// Subcommands: solve, sweep, estimate, envelope, report, validate-config.
// Exit codes: 0 success, 2 config error, 3 solver failure, 4 acceptance
// threshold failure.
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "mage/scenario.hpp"

namespace {

using namespace mage;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  int parallel = 0;
  bool dump_fields = false;
  int resolution_override = 0;
};

ExperimentConfig load(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args.config_path);
  if (args.resolution_override > 0) {
    if (args.resolution_override < 8)
      throw ConfigError("--resolution-override must be >= 8");
    cfg.resolution = args.resolution_override;
  }
  return cfg;
}

// The first sweep member of a configuration, as a standalone problem.
struct SingleProblem {
  PeriodicGrid grid;
  ProblemSpec spec;
  double param = 0.0;
};

SingleProblem build_single(const ExperimentConfig& cfg) {
  SingleProblem sp;
  sp.grid = cfg.make_grid();
  ProblemSpec& spec = sp.spec;
  spec.grid = &sp.grid;
  spec.theta = cfg.make_theta();
  spec.lambda = cfg.lambda;
  switch (cfg.scenario) {
    case Scenario::Thm1Sweep: {
      MeasureFamily fam = cfg.family;
      fam.epsilon = cfg.epsilon_schedule.empty() ? fam.epsilon : cfg.epsilon_schedule.front();
      sp.param = fam.epsilon;
      spec.chi = BackgroundForm(Herm::zero(cfg.n_complex));
      spec.t = 1.0;
      spec.kappa = 0;
      spec.density = realize_density(fam, sp.grid, 1.0);
      break;
    }
    case Scenario::Prop2Collapse:
    case Scenario::SemiFlatLimit: {
      spec.chi = cfg.make_chi(sp.grid);
      spec.kappa = spec.chi.rank();
      spec.t = cfg.t_schedule.empty() ? 1.0 : cfg.t_schedule.front();
      sp.param = spec.t;
      spec.density = normalize_mass(realize_density(cfg.family, sp.grid), 1.0);
      break;
    }
    case Scenario::ContinuityPath: {
      Herm chi_c = Herm::diag(cfg.tmin.chi_diag[0],
                              cfg.tmin.chi_diag.size() > 1 ? cfg.tmin.chi_diag[1] : 0.0);
      spec.chi = BackgroundForm(chi_c);
      spec.kappa = cfg.n_complex;
      spec.lambda = 1;
      spec.t = 1.0;
      sp.param = 1.0;
      spec.density = ScalarField(sp.grid, 1.0);
      break;
    }
    case Scenario::SolverValidation:
    case Scenario::EnvelopeSuite: {
      spec.chi = BackgroundForm(Herm::zero(cfg.n_complex));
      spec.t = 1.0;
      spec.kappa = 0;
      spec.density = realize_density(cfg.family, sp.grid, 1.0);
      sp.param = cfg.resolution;
      break;
    }
  }
  return sp;
}

int cmd_solve(const CommonArgs& args, bool with_estimates) {
  ExperimentConfig cfg = load(args);
  SingleProblem sp = build_single(cfg);
  detail::ensure_dir(args.out_dir);
  Solution sol = solve_ma(sp.spec, cfg.solver);
  save_checkpoint(args.out_dir + "/solution", sol, sp.spec.t);
  if (args.dump_fields) {
    write_scalar(args.out_dir + "/density.mage", sp.spec.density);
    write_hermitian(args.out_dir + "/metric.mage", sol.metric);
  }
  nlohmann::json diag;
  diag["t"] = sp.spec.t;
  diag["param"] = sp.param;
  diag["c_t"] = sol.c_t;
  diag["residual_sup"] = sol.residual_sup;
  diag["newton_iters"] = sol.newton_iters;
  diag["oscillation"] = oscillation(sol.phi);
  if (with_estimates) {
    EstimateOptions eopts;
    eopts.geodesic = detail::geodesic_options(cfg.estimates);
    eopts.with_diameter = cfg.estimates.diameter;
    for (double r : cfg.estimates.ball_radii)
      eopts.balls.push_back({cfg.estimates.ball_center, r});
    EstimateReport rep = estimate_report(sol, sp.spec, eopts);
    diag["gradient_sup"] = rep.gradient_sup;
    diag["ricci_lower_C"] = rep.ricci_lower_C;
    diag["schwarz_trace_sup"] = rep.schwarz_trace_sup;
    diag["diameter"] = rep.diameter;
    nlohmann::json balls = nlohmann::json::array();
    for (const auto& b : rep.volume_ratios)
      balls.push_back({{"r", b.radius}, {"ratio", b.ratio}});
    diag["volume_ratios"] = balls;
  }
  const std::string path = args.out_dir + (with_estimates ? "/estimates.json" : "/solve.json");
  std::ofstream out(path, std::ios::trunc);
  out << diag.dump(2) << "\n";
  std::printf("wrote %s (residual %.3e, %d Newton iterations)\n", path.c_str(),
              sol.residual_sup, sol.newton_iters);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mage: numerical laboratory for geometric Monge-Ampere families on flat tori"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config)
      cmd->add_option("--config", args.config_path, "configuration file (JSON)")->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--parallel", args.parallel, "worker threads for sweep members");
    cmd->add_flag("--dump-fields", args.dump_fields, "write MAGE1 field dumps");
    cmd->add_option("--resolution-override", args.resolution_override,
                    "override the grid resolution from the config");
  };

  CLI::App* c_validate = app.add_subcommand("validate-config", "check a configuration file");
  add_common(c_validate, true);
  CLI::App* c_solve = app.add_subcommand("solve", "solve the first sweep member once");
  add_common(c_solve, true);
  CLI::App* c_sweep = app.add_subcommand("sweep", "run the configured scenario sweep");
  add_common(c_sweep, true);
  CLI::App* c_estimate =
      app.add_subcommand("estimate", "solve the first member and emit its estimate report");
  add_common(c_estimate, true);
  CLI::App* c_envelope = app.add_subcommand("envelope", "run the pluripotential suite");
  add_common(c_envelope, true);
  CLI::App* c_report = app.add_subcommand("report", "build series files from results.csv");
  add_common(c_report, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_validate->parsed()) {
      load(args);
      std::printf("config ok\n");
      return 0;
    }
    if (c_solve->parsed()) return cmd_solve(args, /*with_estimates=*/false);
    if (c_estimate->parsed()) return cmd_solve(args, /*with_estimates=*/true);
    if (c_sweep->parsed()) {
      ExperimentConfig cfg = load(args);
      ScenarioResult res = run_scenario(cfg, args.out_dir, args.parallel, args.dump_fields);
      std::printf("scenario %s: %zu result rows, %zu failures, exit %d\n",
                  scenario_name(cfg.scenario).c_str(), res.results.rows.size(),
                  res.failures.rows.size(), res.exit_code);
      return res.exit_code;
    }
    if (c_envelope->parsed()) {
      ExperimentConfig cfg = load(args);
      detail::ensure_dir(args.out_dir);
      ScenarioResult res = run_envelope_suite(cfg);
      write_csv(args.out_dir + "/results.csv", res.results);
      if (!res.failures.empty()) write_csv(args.out_dir + "/failures.csv", res.failures);
      std::ofstream sout(args.out_dir + "/summary.json", std::ios::trunc);
      sout << res.summary.dump(2) << "\n";
      return res.exit_code;
    }
    if (c_report->parsed()) {
      ResultTable table = read_csv(args.out_dir + "/results.csv");
      write_report(args.out_dir, table);
      std::printf("report written to %s\n", args.out_dir.c_str());
      return 0;
    }
  } catch (const mage::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const mage::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
