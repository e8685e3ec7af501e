#include "asvempc/scenario.hpp"

#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <utility>

namespace asvempc {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ScenarioError("scenario: " + msg); }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) fail("unknown key '" + it.key() + "' in " + where);
}

const json& require_object(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where + " must be an object");
  return j;
}

double num_at(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number()) fail("'" + key + "' in " + where + " must be a number");
  return v.get<double>();
}

double num_or(const json& j, const std::string& key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return num_at(j, key, where);
}

int int_or(const json& j, const std::string& key, int fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) fail("'" + key + "' in " + where + " must be an integer");
  return v.get<int>();
}

bool bool_or(const json& j, const std::string& key, bool fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean()) fail("'" + key + "' in " + where + " must be a boolean");
  return v.get<bool>();
}

std::string string_at(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_string()) fail("'" + key + "' in " + where + " must be a string");
  return v.get<std::string>();
}

std::string resolve(const std::string& path, const std::filesystem::path& base_dir) {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (base_dir / p).lexically_normal().string();
}

VesselParams parse_vessel(const json& j) {
  require_object(j, "vessel");
  check_keys(j, {"preset", "overrides"}, "vessel");
  std::string preset = "sim";
  if (j.contains("preset")) preset = string_at(j, "preset", "vessel");
  VesselParams p;
  try {
    p = params_preset(preset);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (j.contains("overrides")) {
    const json& o = require_object(j.at("overrides"), "vessel.overrides");
    check_keys(o, {"m11", "m22", "m33", "Xu", "Yv", "Nr", "l", "T_max", "T_min", "alpha", "T_w"},
               "vessel.overrides");
    const std::string w = "vessel.overrides";
    p.m11 = num_or(o, "m11", p.m11, w);
    p.m22 = num_or(o, "m22", p.m22, w);
    p.m33 = num_or(o, "m33", p.m33, w);
    p.Xu = num_or(o, "Xu", p.Xu, w);
    p.Yv = num_or(o, "Yv", p.Yv, w);
    p.Nr = num_or(o, "Nr", p.Nr, w);
    p.l = num_or(o, "l", p.l, w);
    p.T_max = num_or(o, "T_max", p.T_max, w);
    p.T_min = num_or(o, "T_min", p.T_min, w);
    p.alpha = num_or(o, "alpha", p.alpha, w);
    p.T_w = num_or(o, "T_w", p.T_w, w);
  }
  return p;
}

std::vector<Waypoint> parse_waypoints(const json& j) {
  if (!j.is_array() || j.empty()) fail("'waypoints' must be a non-empty array of [x, y] pairs");
  std::vector<Waypoint> out;
  for (const json& wp : j) {
    if (!wp.is_array() || wp.size() != 2 || !wp[0].is_number() || !wp[1].is_number())
      fail("each waypoint must be a [x, y] pair of numbers");
    out.push_back({wp[0].get<double>(), wp[1].get<double>()});
  }
  return out;
}

VesselState parse_initial_state(const json& j) {
  require_object(j, "initial_state");
  check_keys(j, {"u", "v", "r", "x", "y", "psi"}, "initial_state");
  VesselState s;
  const std::string w = "initial_state";
  s.u = num_or(j, "u", 0.0, w);
  s.v = num_or(j, "v", 0.0, w);
  s.r = num_or(j, "r", 0.0, w);
  s.x = num_or(j, "x", 0.0, w);
  s.y = num_or(j, "y", 0.0, w);
  s.psi = num_or(j, "psi", 0.0, w);
  return s;
}

DisturbanceSpec parse_disturbance(const json& j, const std::filesystem::path& base_dir) {
  require_object(j, "disturbance");
  if (!j.contains("kind")) fail("disturbance needs a 'kind'");
  const std::string kind = string_at(j, "kind", "disturbance");
  if (kind == "none") {
    check_keys(j, {"kind"}, "disturbance");
    return no_disturbance();
  }
  if (kind == "constant_body") {
    check_keys(j, {"kind", "tau_u", "tau_v"}, "disturbance");
    return constant_body_disturbance(num_at(j, "tau_u", "disturbance"),
                                     num_at(j, "tau_v", "disturbance"));
  }
  if (kind == "constant_inertial") {
    check_keys(j, {"kind", "tau_x", "tau_y"}, "disturbance");
    return constant_inertial_disturbance(num_at(j, "tau_x", "disturbance"),
                                         num_at(j, "tau_y", "disturbance"));
  }
  if (kind == "grid") {
    check_keys(j, {"kind", "csv"}, "disturbance");
    const std::string path = resolve(string_at(j, "csv", "disturbance"), base_dir);
    try {
      return grid_disturbance(std::make_shared<GridField>(load_grid(path)), path);
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }
  fail("unknown disturbance kind '" + kind + "'");
}

SimConfig parse_sim(const json& j) {
  require_object(j, "sim");
  check_keys(j, {"dt", "max_sim_time", "r_coa", "plant_substeps", "apply_dead_zone", "out_dir"},
             "sim");
  SimConfig s;
  const std::string w = "sim";
  s.dt = num_or(j, "dt", s.dt, w);
  s.max_sim_time = num_or(j, "max_sim_time", s.max_sim_time, w);
  s.r_coa = num_or(j, "r_coa", s.r_coa, w);
  s.plant_substeps = int_or(j, "plant_substeps", s.plant_substeps, w);
  s.apply_dead_zone = bool_or(j, "apply_dead_zone", s.apply_dead_zone, w);
  if (j.contains("out_dir")) s.out_dir = string_at(j, "out_dir", w);
  return s;
}

SolveOptions parse_solver(const json& j, const SolveOptions& base, const std::string& where) {
  require_object(j, where);
  check_keys(j, {"max_iterations", "kkt_tolerance", "constraint_tolerance", "fd_step"}, where);
  SolveOptions s = base;
  s.max_iterations = int_or(j, "max_iterations", s.max_iterations, where);
  s.kkt_tolerance = num_or(j, "kkt_tolerance", s.kkt_tolerance, where);
  s.constraint_tolerance = num_or(j, "constraint_tolerance", s.constraint_tolerance, where);
  s.fd_step = num_or(j, "fd_step", s.fd_step, where);
  return s;
}

ControllerSpec parse_controller(const json& j, double sim_dt) {
  require_object(j, "controllers entry");
  check_keys(j,
             {"name", "variant", "horizon", "dt", "n", "y_scale", "t_cap", "t_d_min",
              "u_penalty_weight", "u_floor", "Q", "R", "u_ref", "warm_start", "use_disturbance",
              "solver"},
             "controller");
  if (!j.contains("name") || !j.contains("variant"))
    fail("each controller needs 'name' and 'variant'");
  ControllerSpec spec;
  spec.name = string_at(j, "name", "controller");
  const std::string variant = string_at(j, "variant", "controller");
  const std::string w = "controller '" + spec.name + "'";
  ControllerVariant v;
  try {
    v = variant_from_string(variant);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  ControllerConfig c =
      v == ControllerVariant::nmpc ? default_nmpc_config() : default_empc_config(v);
  c.dt = sim_dt;
  c.horizon = int_or(j, "horizon", c.horizon, w);
  if (j.contains("dt")) {
    const double dt = num_at(j, "dt", w);
    if (dt != sim_dt) fail(w + ": controller dt must equal sim dt");
    c.dt = dt;
  }
  c.n = num_or(j, "n", c.n, w);
  c.y_scale = num_or(j, "y_scale", c.y_scale, w);
  c.t_cap = num_or(j, "t_cap", c.t_cap, w);
  c.t_d_min = num_or(j, "t_d_min", c.t_d_min, w);
  c.u_penalty_weight = num_or(j, "u_penalty_weight", c.u_penalty_weight, w);
  c.u_floor = num_or(j, "u_floor", c.u_floor, w);
  if (j.contains("Q")) {
    const json& q = j.at("Q");
    if (!q.is_array() || q.size() != 6) fail(w + ": 'Q' must be an array of 6 numbers");
    for (int i = 0; i < 6; ++i) {
      if (!q[i].is_number()) fail(w + ": 'Q' must be an array of 6 numbers");
      c.Q[i] = q[i].get<double>();
    }
  }
  if (j.contains("R")) {
    const json& r = j.at("R");
    if (!r.is_array() || r.size() != 2) fail(w + ": 'R' must be an array of 2 numbers");
    for (int i = 0; i < 2; ++i) {
      if (!r[i].is_number()) fail(w + ": 'R' must be an array of 2 numbers");
      c.R[i] = r[i].get<double>();
    }
  }
  c.u_ref = num_or(j, "u_ref", c.u_ref, w);
  c.warm_start = bool_or(j, "warm_start", c.warm_start, w);
  c.use_disturbance = bool_or(j, "use_disturbance", c.use_disturbance, w);
  if (j.contains("solver")) c.solver = parse_solver(j.at("solver"), c.solver, w + ".solver");
  spec.config = c;
  return spec;
}

}  // namespace

void Scenario::validate() const {
  try {
    vessel.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (!initial_state.finite()) fail("non-finite initial state");
  try {
    make_path(waypoints, sim.r_coa, initial_state.position());
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (!(sim.dt > 0) || !std::isfinite(sim.dt)) fail("sim: dt must be positive");
  if (!(sim.max_sim_time >= sim.dt)) fail("sim: max_sim_time must cover at least one step");
  if (sim.plant_substeps < 1) fail("sim: plant_substeps must be at least 1");
  if (controllers.empty()) fail("at least one controller required");
  std::set<std::string> names;
  for (const auto& spec : controllers) {
    if (spec.name.empty()) fail("controller names must be non-empty");
    if (spec.name.find('/') != std::string::npos || spec.name.find('\\') != std::string::npos)
      fail("controller name '" + spec.name + "' must not contain path separators");
    if (!names.insert(spec.name).second) fail("duplicate controller name '" + spec.name + "'");
    try {
      spec.config.validate();
    } catch (const std::invalid_argument& e) {
      fail("controller '" + spec.name + "': " + e.what());
    }
    if (spec.config.dt != sim.dt)
      fail("controller '" + spec.name + "': controller dt must equal sim dt");
  }
  if (disturbance.kind == DisturbanceKind::grid && !disturbance.grid)
    fail("grid disturbance missing grid data");
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open scenario file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(std::string("parse error in '") + path + "': " + e.what());
  }
  const std::filesystem::path base_dir = std::filesystem::path(path).parent_path();

  require_object(doc, "scenario document");
  check_keys(doc,
             {"vessel", "waypoints", "initial_state", "disturbance", "controllers", "sim",
              "grid_csv"},
             "scenario");
  if (!doc.contains("waypoints")) fail("'waypoints' is required");
  if (!doc.contains("controllers")) fail("'controllers' is required");

  Scenario s;
  if (doc.contains("sim")) s.sim = parse_sim(doc.at("sim"));
  if (doc.contains("vessel")) s.vessel = parse_vessel(doc.at("vessel"));
  s.waypoints = parse_waypoints(doc.at("waypoints"));
  if (doc.contains("initial_state")) s.initial_state = parse_initial_state(doc.at("initial_state"));
  if (doc.contains("disturbance")) s.disturbance = parse_disturbance(doc.at("disturbance"), base_dir);
  const json& ctrls = doc.at("controllers");
  if (!ctrls.is_array() || ctrls.empty()) fail("'controllers' must be a non-empty array");
  for (const json& c : ctrls) s.controllers.push_back(parse_controller(c, s.sim.dt));
  if (doc.contains("grid_csv")) s.grid_csv = resolve(string_at(doc, "grid_csv", "scenario"), base_dir);

  s.validate();
  return s;
}

Scenario default_scenario() {
  Scenario s;
  s.vessel = sim_params();
  s.vessel.T_w = 1.0;
  s.waypoints = {{4, 0}, {8, 0}, {8, 4}, {4, 4}, {0, 4}};
  s.initial_state.u = 0.06;
  s.controllers.push_back({"cc", default_empc_config(ControllerVariant::cc_empc)});
  s.controllers.push_back({"eo", default_empc_config(ControllerVariant::eo_empc)});
  s.controllers.push_back({"nmpc", default_nmpc_config()});
  return s;
}

Scenario straight_leg_scenario() {
  Scenario s;
  s.vessel = sim_params();
  s.vessel.T_w = 1.0;
  s.waypoints = {{5, 0}, {10, 0}};
  s.initial_state.u = 0.06;
  s.controllers.push_back({"cc", default_empc_config(ControllerVariant::cc_empc)});
  s.controllers.push_back({"eo", default_empc_config(ControllerVariant::eo_empc)});
  s.sim.max_sim_time = 400;
  return s;
}

Scenario single_leg_oracle_scenario() {
  Scenario s;
  s.vessel = sim_params();
  s.vessel.T_w = 1.0;
  s.waypoints = {{8, 0}};
  s.initial_state.u = 0.06;
  s.controllers.push_back({"eo", default_empc_config(ControllerVariant::eo_empc)});
  s.sim.max_sim_time = 300;
  return s;
}

GridField make_demo_grid() {
  GridField g;
  g.xs = Eigen::VectorXd::LinSpaced(9, -2.0, 14.0);
  g.ys = Eigen::VectorXd::LinSpaced(7, -4.0, 8.0);
  g.taux.resize(g.xs.size(), g.ys.size());
  g.tauy.resize(g.xs.size(), g.ys.size());
  for (int i = 0; i < g.xs.size(); ++i) {
    for (int j = 0; j < g.ys.size(); ++j) {
      const double x = g.xs[i], y = g.ys[j];
      g.taux(i, j) = 0.06 * std::sin(0.35 * x + 0.2 * y) - 0.02;
      g.tauy(i, j) = 0.05 * std::cos(0.30 * x) + 0.04 * std::sin(0.25 * y) + 0.03;
    }
  }
  return g;
}

DisturbanceSpec condition_disturbance(int condition, const std::string& grid_path) {
  switch (condition) {
    case 1: return no_disturbance();
    case 2: return constant_body_disturbance(0.015, 0.015);
    case 3: return constant_inertial_disturbance(-0.0003, 0.0799);
    case 4: return constant_inertial_disturbance(-0.0987, 0.0868);
    case 5:
      if (grid_path.empty())
        return grid_disturbance(std::make_shared<GridField>(make_demo_grid()));
      try {
        return grid_disturbance(std::make_shared<GridField>(load_grid(grid_path)), grid_path);
      } catch (const std::exception& e) {
        fail(e.what());
      }
    default:
      fail("disturbance condition must be 1..5, got " + std::to_string(condition));
  }
}

DisturbanceSpec condition_disturbance(int condition, std::shared_ptr<const GridField> grid) {
  if (condition == 5) {
    if (!grid) fail("condition 5 requires grid data");
    return grid_disturbance(std::move(grid));
  }
  return condition_disturbance(condition, std::string{});
}

}  // namespace asvempc
