// Experiment configuration: one structured JSON document per run, validated
// against the scenario's schema before any compute starts.
#pragma once

#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "mage/solver.hpp"

namespace mage {

enum class Scenario {
  SolverValidation,
  Thm1Sweep,
  Prop2Collapse,
  SemiFlatLimit,
  ContinuityPath,
  EnvelopeSuite,
};

inline const std::map<std::string, Scenario>& scenario_names() {
  static const std::map<std::string, Scenario> names = {
      {"solver_validation", Scenario::SolverValidation},
      {"thm1_sweep", Scenario::Thm1Sweep},
      {"prop2_collapse", Scenario::Prop2Collapse},
      {"semiflat_limit", Scenario::SemiFlatLimit},
      {"continuity_path", Scenario::ContinuityPath},
      {"envelope_suite", Scenario::EnvelopeSuite},
  };
  return names;
}

inline std::string scenario_name(Scenario s) {
  for (const auto& [name, v] : scenario_names())
    if (v == s) return name;
  return "unknown";
}

struct EstimateConfig {
  bool diameter = true;
  int stencil_radius = 2;
  int source_count = 8;
  int extension_resolution = 0;
  std::vector<double> ball_radii = {0.05, 0.1, 0.2};
  std::vector<double> ball_center = {0.5, 0.5, 0.5, 0.5};
  int oracle_refine = 8;
  int fiber_samples = 4;
};

struct TminConfig {
  std::vector<double> chi_diag = {1.0, -0.25};
  double bisection_tol = 0.02;
  int detect_resolution = 16;
};

struct EnvelopeConfig {
  double amplitude = 0.5;
  int oracle_refine = 8;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::SolverValidation;
  int n_complex = 1;
  GridMode mode = GridMode::Reduced;
  int resolution = 64;
  int lambda = 0;
  std::vector<double> chi_diag;  // constant part of chi (empty: zero form)
  double chi_potential_amplitude = 0.0;
  MeasureFamily family;
  std::vector<double> epsilon_schedule;
  std::vector<double> t_schedule;
  std::vector<int> resolutions = {64, 128, 256};
  SolveParams solver;
  EstimateConfig estimates;
  TminConfig tmin;
  EnvelopeConfig envelope;
  double bound_stability_threshold = 1.5;
  int parallelism = 1;
  std::uint64_t seed = 12345;
  std::string output_dir = "out";

  PeriodicGrid make_grid() const { return build_grid(n_complex, mode, resolution); }

  BackgroundForm make_chi(const PeriodicGrid& grid) const {
    Herm c = Herm::zero(n_complex);
    if (!chi_diag.empty()) {
      c.d0 = chi_diag[0];
      if (n_complex == 2) c.d1 = chi_diag.size() > 1 ? chi_diag[1] : 0.0;
    }
    if (chi_potential_amplitude != 0.0) {
      ScalarField h(grid);
      double x[4];
      for (index_t i = 0; i < grid.node_count(); ++i) {
        grid.coordinates(i, x);
        h[i] = chi_potential_amplitude * std::cos(2.0 * M_PI * x[0]);
      }
      return BackgroundForm(c, std::move(h));
    }
    return BackgroundForm(c);
  }

  BackgroundForm make_theta() const { return BackgroundForm(Herm::identity(n_complex)); }
};

namespace detail {

inline void require_decreasing(const std::vector<double>& v, const std::string& what) {
  if (v.empty()) throw ConfigError(what + " must be nonempty");
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] < v[k - 1]))
      throw ConfigError(what + " must be strictly decreasing (entry " + std::to_string(k) + ")");
  for (double x : v)
    if (!(x > 0.0)) throw ConfigError(what + " entries must be positive");
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig cfg;

  if (!j.contains("scenario") || !j["scenario"].is_string())
    throw ConfigError("config needs a string field 'scenario'");
  const std::string sname = j["scenario"].get<std::string>();
  const auto it = scenario_names().find(sname);
  if (it == scenario_names().end()) {
    std::string known;
    for (const auto& [name, v] : scenario_names()) known += name + " ";
    throw ConfigError("unknown scenario '" + sname + "' (known: " + known + ")");
  }
  cfg.scenario = it->second;

  if (j.contains("grid")) {
    const auto& g = j["grid"];
    cfg.n_complex = g.value("n_complex", 1);
    if (cfg.n_complex < 1 || cfg.n_complex > 2)
      throw ConfigError("grid.n_complex must be 1 or 2");
    const std::string mode = g.value("mode", "reduced");
    if (mode == "full") cfg.mode = GridMode::Full;
    else if (mode == "reduced") cfg.mode = GridMode::Reduced;
    else throw ConfigError("grid.mode must be 'full' or 'reduced'");
    cfg.resolution = g.value("resolution", 64);
    if (cfg.resolution < 8) throw ConfigError("grid.resolution must be >= 8");
  }

  cfg.lambda = j.value("lambda", 0);
  if (cfg.lambda != 0 && cfg.lambda != 1) throw ConfigError("lambda must be 0 or 1");

  if (j.contains("chi")) {
    const auto& c = j["chi"];
    if (c.contains("diag")) cfg.chi_diag = c["diag"].get<std::vector<double>>();
    cfg.chi_potential_amplitude = c.value("potential_amplitude", 0.0);
    if (static_cast<int>(cfg.chi_diag.size()) > cfg.n_complex)
      throw ConfigError("chi.diag has more entries than complex dimensions");
  }

  if (j.contains("family")) {
    const auto& f = j["family"];
    const std::string kind = f.value("kind", "smooth");
    if (kind == "smooth") cfg.family.kind = MeasureKind::Smooth;
    else if (kind == "singular_pole") cfg.family.kind = MeasureKind::SingularPole;
    else if (kind == "product") cfg.family.kind = MeasureKind::Product;
    else throw ConfigError("family.kind must be smooth | singular_pole | product");
    cfg.family.alpha = f.value("alpha", 0.4);
    cfg.family.epsilon = f.value("epsilon", 0.1);
    cfg.family.p = f.value("p", 2.0);
    if (f.contains("center")) cfg.family.center = f["center"].get<std::vector<double>>();
    if (f.contains("amplitudes")) cfg.family.amplitudes = f["amplitudes"].get<std::vector<double>>();
  }
  if (cfg.family.center.empty()) cfg.family.center.assign(4, 0.5);

  if (j.contains("epsilon_schedule")) {
    cfg.epsilon_schedule = j["epsilon_schedule"].get<std::vector<double>>();
    detail::require_decreasing(cfg.epsilon_schedule, "epsilon_schedule");
  }
  if (j.contains("t_schedule")) {
    cfg.t_schedule = j["t_schedule"].get<std::vector<double>>();
    detail::require_decreasing(cfg.t_schedule, "t_schedule");
  }
  if (j.contains("resolutions")) {
    cfg.resolutions = j["resolutions"].get<std::vector<int>>();
    if (cfg.resolutions.empty()) throw ConfigError("resolutions must be nonempty");
    for (int r : cfg.resolutions)
      if (r < 8) throw ConfigError("resolutions entries must be >= 8");
  }

  if (j.contains("solver")) {
    const auto& s = j["solver"];
    cfg.solver.residual_tol = s.value("residual_tol", 1e-10);
    cfg.solver.max_newton = s.value("max_newton", 60);
    cfg.solver.linear_tol = s.value("linear_tol", 1e-3);
    if (!(cfg.solver.residual_tol > 0.0)) throw ConfigError("solver.residual_tol must be > 0");
    if (cfg.solver.max_newton < 1) throw ConfigError("solver.max_newton must be >= 1");
  }

  if (j.contains("estimates")) {
    const auto& e = j["estimates"];
    cfg.estimates.diameter = e.value("diameter", true);
    cfg.estimates.stencil_radius = e.value("stencil_radius", 2);
    if (cfg.estimates.stencil_radius < 1 || cfg.estimates.stencil_radius > 3)
      throw ConfigError("estimates.stencil_radius must be in {1,2,3}");
    cfg.estimates.source_count = e.value("source_count", 8);
    cfg.estimates.extension_resolution = e.value("extension_resolution", 0);
    if (e.contains("ball_radii")) cfg.estimates.ball_radii = e["ball_radii"].get<std::vector<double>>();
    if (e.contains("ball_center")) cfg.estimates.ball_center = e["ball_center"].get<std::vector<double>>();
    cfg.estimates.oracle_refine = e.value("oracle_refine", 8);
    cfg.estimates.fiber_samples = e.value("fiber_samples", 4);
  }

  if (j.contains("tmin")) {
    const auto& t = j["tmin"];
    if (t.contains("chi_diag")) cfg.tmin.chi_diag = t["chi_diag"].get<std::vector<double>>();
    cfg.tmin.bisection_tol = t.value("bisection_tol", 0.02);
    cfg.tmin.detect_resolution = t.value("detect_resolution", 16);
    if (!(cfg.tmin.bisection_tol > 0.0)) throw ConfigError("tmin.bisection_tol must be > 0");
  }

  if (j.contains("envelope")) {
    const auto& e = j["envelope"];
    cfg.envelope.amplitude = e.value("amplitude", 0.5);
    cfg.envelope.oracle_refine = e.value("oracle_refine", 8);
  }

  cfg.bound_stability_threshold = j.value("bound_stability_threshold", 1.5);
  cfg.parallelism = j.value("parallelism", 1);
  if (cfg.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  cfg.seed = j.value("seed", std::uint64_t(12345));
  cfg.output_dir = j.value("output_dir", "out");

  // scenario-specific requirements
  switch (cfg.scenario) {
    case Scenario::Thm1Sweep: {
      if (cfg.epsilon_schedule.empty())
        cfg.epsilon_schedule = {1e-1, 1e-2, 1e-3, 1e-4};
      if (cfg.family.kind != MeasureKind::SingularPole)
        throw ConfigError("thm1_sweep needs family.kind = singular_pole");
      if (cfg.n_complex == 1 && !(cfg.family.alpha * cfg.family.p < 1.0))
        throw ConfigError("thm1_sweep misconfigured: alpha * p = " +
                          std::to_string(cfg.family.alpha * cfg.family.p) +
                          " >= 1, the regularized family is not uniformly L^p");
      break;
    }
    case Scenario::Prop2Collapse:
    case Scenario::SemiFlatLimit: {
      if (cfg.t_schedule.empty()) cfg.t_schedule = {1.0, 0.3, 0.1, 0.03, 0.01};
      if (cfg.n_complex != 2)
        throw ConfigError(scenario_name(cfg.scenario) + " needs n_complex = 2");
      break;
    }
    case Scenario::ContinuityPath: {
      if (cfg.t_schedule.empty()) cfg.t_schedule = {1.0, 0.8, 0.6, 0.5, 0.4, 0.35, 0.3};
      break;
    }
    case Scenario::SolverValidation:
    case Scenario::EnvelopeSuite:
      break;
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  return parse_config(j);
}

// Reference configuration for each scenario, kept in sync with the presets
// the acceptance suite runs.
inline nlohmann::json default_config_json(Scenario s) {
  nlohmann::json j;
  j["scenario"] = scenario_name(s);
  j["solver"] = {{"residual_tol", 1e-10}, {"max_newton", 60}, {"linear_tol", 1e-3}};
  j["parallelism"] = 1;
  j["seed"] = 12345;
  j["output_dir"] = "out";
  switch (s) {
    case Scenario::SolverValidation:
      j["grid"] = {{"n_complex", 1}, {"mode", "reduced"}, {"resolution", 64}};
      j["resolutions"] = {64, 128, 256};
      break;
    case Scenario::Thm1Sweep:
      j["grid"] = {{"n_complex", 1}, {"mode", "full"}, {"resolution", 256}};
      j["lambda"] = 0;
      j["family"] = {{"kind", "singular_pole"}, {"alpha", 0.4}, {"p", 2.0},
                     {"epsilon", 0.1},          {"center", {0.5, 0.5, 0.5, 0.5}}};
      j["epsilon_schedule"] = {1e-1, 1e-2, 1e-3, 1e-4};
      j["estimates"] = {{"ball_radii", {0.05, 0.1, 0.2}}, {"oracle_refine", 8}};
      break;
    case Scenario::Prop2Collapse:
      j["grid"] = {{"n_complex", 2}, {"mode", "reduced"}, {"resolution", 256}};
      j["lambda"] = 0;
      j["chi"] = {{"diag", {1.0, 0.0}}};
      j["family"] = {{"kind", "product"}, {"amplitudes", {0.2, 0.03}}};
      j["t_schedule"] = {1.0, 0.3, 0.1, 0.03, 0.01};
      break;
    case Scenario::SemiFlatLimit:
      j["grid"] = {{"n_complex", 2}, {"mode", "reduced"}, {"resolution", 256}};
      j["lambda"] = 1;
      j["chi"] = {{"diag", {1.0, 0.0}}};
      j["family"] = {{"kind", "product"}, {"amplitudes", {0.2, 0.03}}};
      j["t_schedule"] = {1.0, 0.3, 0.1, 0.03, 0.01};
      break;
    case Scenario::ContinuityPath:
      j["grid"] = {{"n_complex", 2}, {"mode", "reduced"}, {"resolution", 32}};
      j["lambda"] = 1;
      j["tmin"] = {{"chi_diag", {1.0, -0.25}}, {"bisection_tol", 0.02}, {"detect_resolution", 16}};
      break;
    case Scenario::EnvelopeSuite:
      j["grid"] = {{"n_complex", 1}, {"mode", "reduced"}, {"resolution", 256}};
      j["envelope"] = {{"amplitude", 0.5}, {"oracle_refine", 8}};
      break;
  }
  return j;
}

}  // namespace mage
