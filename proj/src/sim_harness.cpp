#include "asvempc/sim_harness.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace asvempc {

namespace {

using nlohmann::json;

constexpr const char* kTrajectoryHeader = "t,u,v,r,x,y,psi,T1,T2,tau_u,tau_v,power_W,e_m,wp_index";

SolveTimeStats solve_stats(const std::vector<SolveRecord>& recs) {
  SolveTimeStats s;
  if (recs.empty()) return s;
  std::vector<double> t;
  t.reserve(recs.size());
  for (const auto& r : recs) t.push_back(r.solve_time_ms);
  std::sort(t.begin(), t.end());
  double sum = 0;
  for (double v : t) sum += v;
  const int n = static_cast<int>(t.size());
  s.mean = sum / n;
  const int idx = std::clamp(static_cast<int>(std::ceil(0.95 * n)) - 1, 0, n - 1);
  s.p95 = t[idx];
  s.max = t.back();
  return s;
}

const char* condition_label(int c) {
  switch (c) {
    case 1: return "calm";
    case 2: return "constant body-frame force";
    case 3: return "constant inertial force, mild";
    case 4: return "constant inertial force, strong";
    case 5: return "spatially varying field";
    default: return "unknown";
  }
}

json metrics_json(const RunMetrics& m) {
  json j;
  j["energy_J"] = m.energy;
  j["avg_cross_track_m"] = m.avg_cross_track ? json(*m.avg_cross_track) : json(nullptr);
  j["travel_time_s"] = m.travel_time ? json(*m.travel_time) : json(nullptr);
  j["complete"] = m.complete;
  j["solve_time_ms"] = {{"mean", m.solve_time_ms.mean},
                        {"p95", m.solve_time_ms.p95},
                        {"max", m.solve_time_ms.max}};
  j["steps"] = m.steps;
  j["solver_fallbacks"] = m.solver_fallbacks;
  return j;
}

}  // namespace

RunResult run_closed_loop(const Scenario& scenario, const ControllerSpec& spec) {
  scenario.validate();
  try {
    spec.config.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(std::string("controller '") + spec.name + "': " + e.what());
  }
  if (spec.config.dt != scenario.sim.dt)
    throw ScenarioError("controller '" + spec.name + "': controller dt must equal sim dt");

  const VesselParams& vp = scenario.vessel;
  const SimConfig& sim = scenario.sim;
  PathState path = make_path(scenario.waypoints, sim.r_coa, scenario.initial_state.position());
  path = update_active(path, scenario.initial_state.position());
  Controller ctrl(spec.config, vp);
  VesselState state = scenario.initial_state;

  RunResult out;
  int consecutive_fallbacks = 0;
  const double h = sim.dt / sim.plant_substeps;

  for (int k = 0;; ++k) {
    const double t = k * sim.dt;
    if (mission_complete(path, state.position())) {
      LogRow row;
      row.t = t;
      row.state = state;
      row.cmd = {0, 0};
      row.power = stage_power(ThrustCmd{0, 0}, vp);
      row.e = cross_track_error(path, state.position());
      row.wp_index = path.active;
      out.log.push_back(row);
      break;
    }
    if (t >= sim.max_sim_time) break;

    const StepOutput so = ctrl.step(state, path, &scenario.disturbance);
    ThrustCmd cmd = clamp_thrust(so.cmd, vp);
    if (sim.apply_dead_zone) cmd = apply_dead_zone(cmd, vp);

    const BodyWrench tau0 = sample(scenario.disturbance, state.position(), state.psi);

    LogRow row;
    row.t = t;
    row.state = state;
    row.cmd = cmd;
    row.tau_u = tau0.Fu;
    row.tau_v = tau0.Fv;
    row.power = stage_power(cmd, vp);
    row.e = cross_track_error(path, state.position());
    row.wp_index = path.active;
    out.log.push_back(row);

    SolveRecord rec;
    rec.t = t;
    rec.status = so.diag.status;
    rec.fallback = so.diag.fallback;
    rec.constraint_violation = so.diag.constraint_violation;
    rec.kkt_residual = so.diag.kkt_residual;
    rec.iterations = so.diag.iterations;
    rec.solve_time_ms = so.diag.solve_time_ms;
    rec.d_terminal = so.diag.d_terminal;
    rec.min_predicted_u = so.diag.min_predicted_u;
    rec.max_abs_thrust = std::max(std::abs(cmd.T1), std::abs(cmd.T2));
    out.solves.push_back(rec);

    consecutive_fallbacks = so.diag.fallback ? consecutive_fallbacks + 1 : 0;
    if (consecutive_fallbacks > 10)
      throw RunFailure("run: controller '" + spec.name + "' rejected more than ten consecutive solves near t=" +
                       std::to_string(t) + " s");

    VesselState next = state;
    for (int i = 0; i < sim.plant_substeps; ++i) {
      const BodyWrench tau =
          i == 0 ? tau0 : sample(scenario.disturbance, next.position(), next.psi);
      next = step_discrete(next, cmd, tau, h, vp);
    }
    if (!next.finite())
      throw RunFailure("run: non-finite plant state at t=" + std::to_string(t) + " s");
    state = next;
    path = update_active(path, state.position());
  }

  out.metrics = compute_metrics(out.log, scenario);
  out.metrics.solve_time_ms = solve_stats(out.solves);
  for (const auto& r : out.solves)
    if (r.fallback) ++out.metrics.solver_fallbacks;
  return out;
}

RunMetrics compute_metrics(const TrajectoryLog& log, const Scenario& scenario) {
  RunMetrics m;
  if (log.empty()) return m;
  PathState path =
      make_path(scenario.waypoints, scenario.sim.r_coa, scenario.initial_state.position());
  size_t terminal = log.size();
  double err_sum = 0;
  int err_n = 0;
  for (size_t i = 0; i < log.size(); ++i) {
    const Eigen::Vector2d pos = log[i].state.position();
    path = update_active(path, pos);
    if (mission_complete(path, pos)) {
      m.complete = true;
      terminal = i;
      break;
    }
    if (!inside_any_coa(path, pos)) {
      err_sum += std::abs(log[i].e);
      ++err_n;
    }
  }
  const size_t energy_rows = m.complete ? terminal : log.size();
  for (size_t i = 0; i < energy_rows; ++i) m.energy += log[i].power * scenario.sim.dt;
  if (err_n > 0) m.avg_cross_track = err_sum / err_n;
  if (m.complete) m.travel_time = log[terminal].t;
  m.steps = static_cast<int>(energy_rows);
  return m;
}

void export_trajectory(const TrajectoryLog& log, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("trajectory: cannot open '" + path + "' for writing");
  f << kTrajectoryHeader << '\n';
  f << std::setprecision(17);
  for (const auto& r : log) {
    f << r.t << ',' << r.state.u << ',' << r.state.v << ',' << r.state.r << ',' << r.state.x
      << ',' << r.state.y << ',' << r.state.psi << ',' << r.cmd.T1 << ',' << r.cmd.T2 << ','
      << r.tau_u << ',' << r.tau_v << ',' << r.power << ',' << r.e << ',' << r.wp_index << '\n';
  }
  if (!f) throw std::runtime_error("trajectory: write to '" + path + "' failed");
}

TrajectoryLog import_trajectory(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("trajectory: cannot open '" + path + "'");
  auto fail = [&path](int line, const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
  };
  std::string line;
  if (!std::getline(f, line)) fail(1, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryHeader)
    fail(1, std::string("expected header ") + kTrajectoryHeader);
  TrajectoryLog log;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 13> vals{};
    const char* p = line.c_str();
    for (int i = 0; i < 13; ++i) {
      char* end = nullptr;
      vals[i] = std::strtod(p, &end);
      if (end == p) fail(lineno, "malformed row: bad number");
      p = end;
      if (*p != ',') fail(lineno, "malformed row: expected 14 fields");
      ++p;
    }
    char* end = nullptr;
    const long wp = std::strtol(p, &end, 10);
    if (end == p || *end != '\0') fail(lineno, "malformed row: bad waypoint index");
    LogRow r;
    r.t = vals[0];
    r.state = {vals[1], vals[2], vals[3], vals[4], vals[5], vals[6]};
    r.cmd = {vals[7], vals[8]};
    r.tau_u = vals[9];
    r.tau_v = vals[10];
    r.power = vals[11];
    r.e = vals[12];
    r.wp_index = static_cast<int>(wp);
    log.push_back(r);
  }
  return log;
}

std::string metrics_json_string(const RunMetrics& m) { return metrics_json(m).dump(2) + "\n"; }

void export_metrics(const RunMetrics& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("metrics: cannot open '" + path + "' for writing");
  f << metrics_json_string(m);
  if (!f) throw std::runtime_error("metrics: write to '" + path + "' failed");
}

Comparison run_comparison(const Scenario& base, const std::vector<int>& conditions,
                          std::ostream* progress) {
  base.validate();
  if (conditions.empty()) throw ScenarioError("comparison: at least one condition required");
  Comparison c;
  c.conditions = conditions;
  for (const auto& s : base.controllers) c.controllers.push_back(s.name);
  for (int cond : conditions) {
    Scenario sc = base;
    sc.disturbance = condition_disturbance(cond, base.grid_csv);
    for (const auto& spec : base.controllers) {
      ComparisonEntry entry;
      entry.condition = cond;
      entry.controller = spec.name;
      entry.variant = spec.config.variant;
      entry.result = run_closed_loop(sc, spec);
      if (progress) {
        const RunMetrics& m = entry.result.metrics;
        *progress << "condition " << cond << ", " << spec.name << ": energy "
                  << std::fixed << std::setprecision(2) << m.energy << " J, "
                  << (m.complete ? "complete" : "incomplete") << std::defaultfloat << "\n"
                  << std::flush;
      }
      c.entries.push_back(std::move(entry));
    }
  }
  return c;
}

namespace {

const ComparisonEntry* find_entry(const Comparison& c, int cond, ControllerVariant v) {
  for (const auto& e : c.entries)
    if (e.condition == cond && e.variant == v) return &e;
  return nullptr;
}

}  // namespace

std::string render_comparison_text(const Comparison& c) {
  std::ostringstream os;
  os << std::fixed;
  for (int cond : c.conditions) {
    os << "== condition " << cond << ": " << condition_label(cond) << " ==\n";
    os << std::left << std::setw(12) << "controller" << std::right << std::setw(14)
       << "energy [J]" << std::setw(16) << "avg |e| [m]" << std::setw(12) << "time [s]"
       << std::setw(9) << "steps" << std::setw(11) << "fallbacks" << '\n';
    for (const auto& e : c.entries) {
      if (e.condition != cond) continue;
      const RunMetrics& m = e.result.metrics;
      os << std::left << std::setw(12) << e.controller << std::right;
      os << std::setw(14) << std::setprecision(2) << m.energy;
      if (m.avg_cross_track)
        os << std::setw(16) << std::setprecision(4) << *m.avg_cross_track;
      else
        os << std::setw(16) << "n/a";
      if (m.travel_time)
        os << std::setw(12) << std::setprecision(1) << *m.travel_time;
      else
        os << std::setw(12) << "incomplete";
      os << std::setw(9) << m.steps << std::setw(11) << m.solver_fallbacks << '\n';
    }
    const ComparisonEntry* cc = find_entry(c, cond, ControllerVariant::cc_empc);
    const ComparisonEntry* eo = find_entry(c, cond, ControllerVariant::eo_empc);
    if (cc && eo && cc->result.metrics.complete && eo->result.metrics.complete) {
      os << std::setprecision(2);
      if (eo->result.metrics.energy > 0) {
        const double de = (cc->result.metrics.energy / eo->result.metrics.energy - 1.0) * 100.0;
        os << "cc vs eo: energy " << std::showpos << de << "%" << std::noshowpos;
      }
      if (cc->result.metrics.avg_cross_track && eo->result.metrics.avg_cross_track &&
          *eo->result.metrics.avg_cross_track > 0) {
        const double dcte = (*cc->result.metrics.avg_cross_track /
                                 *eo->result.metrics.avg_cross_track -
                             1.0) *
                            100.0;
        os << ", avg cross-track " << std::showpos << dcte << "%" << std::noshowpos;
      }
      os << '\n';
    }
    os << '\n';
  }
  return os.str();
}

std::string comparison_json_string(const Comparison& c) {
  json doc;
  doc["conditions"] = json::array();
  for (int cond : c.conditions) {
    json jc;
    jc["condition"] = cond;
    jc["label"] = condition_label(cond);
    jc["runs"] = json::array();
    for (const auto& e : c.entries) {
      if (e.condition != cond) continue;
      json run;
      run["controller"] = e.controller;
      run["variant"] = to_string(e.variant);
      run["metrics"] = metrics_json(e.result.metrics);
      jc["runs"].push_back(std::move(run));
    }
    const ComparisonEntry* cc = find_entry(c, cond, ControllerVariant::cc_empc);
    const ComparisonEntry* eo = find_entry(c, cond, ControllerVariant::eo_empc);
    if (cc && eo && cc->result.metrics.complete && eo->result.metrics.complete &&
        eo->result.metrics.energy > 0) {
      json delta;
      delta["energy_pct"] = (cc->result.metrics.energy / eo->result.metrics.energy - 1.0) * 100.0;
      if (cc->result.metrics.avg_cross_track && eo->result.metrics.avg_cross_track &&
          *eo->result.metrics.avg_cross_track > 0)
        delta["avg_cross_track_pct"] = (*cc->result.metrics.avg_cross_track /
                                            *eo->result.metrics.avg_cross_track -
                                        1.0) *
                                       100.0;
      else
        delta["avg_cross_track_pct"] = nullptr;
      jc["cc_vs_eo"] = std::move(delta);
    }
    doc["conditions"].push_back(std::move(jc));
  }
  return doc.dump(2) + "\n";
}

OracleResult run_oracle(const Scenario& scenario, const OracleOptions& options) {
  scenario.validate();
  return collocation_oracle(scenario.vessel, scenario.initial_state, scenario.waypoints,
                            scenario.sim.r_coa, scenario.disturbance, options);
}

void export_oracle_csv(const OracleResult& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("oracle: cannot open '" + path + "' for writing");
  f << "t,u,v,r,x,y,psi,T1,T2\n";
  f << std::setprecision(17);
  const int n = static_cast<int>(r.states.rows());
  for (int j = 0; j < n; ++j) {
    const double t = n > 1 ? r.total_time * j / (n - 1) : 0.0;
    // last node repeats the final interval's thrust for easy plotting
    const int ci = std::min<int>(j, static_cast<int>(r.controls.rows()) - 1);
    const double T1 = ci >= 0 ? r.controls(ci, 0) : 0.0;
    const double T2 = ci >= 0 ? r.controls(ci, 1) : 0.0;
    f << t;
    for (int q = 0; q < 6; ++q) f << ',' << r.states(j, q);
    f << ',' << T1 << ',' << T2 << '\n';
  }
  if (!f) throw std::runtime_error("oracle: write to '" + path + "' failed");
}

}  // namespace asvempc
