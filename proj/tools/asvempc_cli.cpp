#include "CLI11.hpp"

#include "asvempc/scenario.hpp"
#include "asvempc/sim_harness.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace asvempc;

namespace {

// exit codes: 0 ok, 1 bad scenario/input, 2 runtime failure, 3 run incomplete
constexpr int kExitOk = 0;
constexpr int kExitScenario = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitIncomplete = 3;

std::string pick_out_dir(const std::string& cli_out, const Scenario& s) {
  if (!cli_out.empty()) return cli_out;
  if (!s.sim.out_dir.empty()) return s.sim.out_dir;
  return "out";
}

void print_run_summary(std::ostream& os, const std::string& name, const RunMetrics& m) {
  os << name << ": energy " << m.energy << " J";
  if (m.travel_time)
    os << ", time " << *m.travel_time << " s";
  else
    os << ", incomplete";
  if (m.avg_cross_track) os << ", avg |e| " << *m.avg_cross_track << " m";
  os << ", steps " << m.steps << ", fallbacks " << m.solver_fallbacks << "\n";
}

int cmd_run(const std::string& scenario_path, const std::string& cli_out,
            const std::vector<std::string>& only) {
  Scenario s = load_scenario(scenario_path);
  std::vector<ControllerSpec> specs;
  if (only.empty()) {
    specs = s.controllers;
  } else {
    for (const auto& name : only) {
      bool found = false;
      for (const auto& spec : s.controllers)
        if (spec.name == name) {
          specs.push_back(spec);
          found = true;
        }
      if (!found) throw ScenarioError("scenario has no controller named '" + name + "'");
    }
  }
  const fs::path out_dir = pick_out_dir(cli_out, s);
  fs::create_directories(out_dir);
  bool all_complete = true;
  for (const auto& spec : specs) {
    const RunResult r = run_closed_loop(s, spec);
    export_trajectory(r.log, (out_dir / (spec.name + "_trajectory.csv")).string());
    export_metrics(r.metrics, (out_dir / (spec.name + "_metrics.json")).string());
    print_run_summary(std::cout, spec.name, r.metrics);
    all_complete = all_complete && r.metrics.complete;
  }
  std::cout << "outputs in " << out_dir.string() << "\n";
  return all_complete ? kExitOk : kExitIncomplete;
}

int cmd_compare(const std::string& scenario_path, const std::string& cli_out,
                std::vector<int> conditions) {
  Scenario s = load_scenario(scenario_path);
  if (conditions.empty())
    for (int c = 1; c <= kNumConditions; ++c) conditions.push_back(c);
  const fs::path out_dir = pick_out_dir(cli_out, s);
  fs::create_directories(out_dir);
  const Comparison cmp = run_comparison(s, conditions, &std::cerr);
  bool all_complete = true;
  for (const auto& e : cmp.entries) {
    const std::string stem = e.controller + "_cond" + std::to_string(e.condition);
    export_trajectory(e.result.log, (out_dir / (stem + "_trajectory.csv")).string());
    export_metrics(e.result.metrics, (out_dir / (stem + "_metrics.json")).string());
    all_complete = all_complete && e.result.metrics.complete;
  }
  const std::string text = render_comparison_text(cmp);
  {
    std::ofstream f(out_dir / "comparison.txt");
    f << text;
  }
  {
    std::ofstream f(out_dir / "comparison.json");
    f << comparison_json_string(cmp);
  }
  std::cout << text;
  std::cout << "outputs in " << out_dir.string() << "\n";
  return all_complete ? kExitOk : kExitIncomplete;
}

int cmd_validate(const std::string& scenario_path) {
  const Scenario s = load_scenario(scenario_path);
  if (!s.grid_csv.empty()) condition_disturbance(5, s.grid_csv);  // surfaces grid errors
  std::cout << "scenario OK: " << s.waypoints.size() << " waypoints, " << s.controllers.size()
            << " controllers, dt " << s.sim.dt << " s\n";
  return kExitOk;
}

int cmd_oracle(const std::string& scenario_path, const std::string& cli_out, int nodes) {
  Scenario s = load_scenario(scenario_path);
  OracleOptions opt;
  if (nodes > 0) opt.nodes = nodes;
  const OracleResult r = run_oracle(s, opt);
  const fs::path out_dir = pick_out_dir(cli_out, s);
  fs::create_directories(out_dir);
  export_oracle_csv(r, (out_dir / "oracle.csv").string());
  std::cout << "oracle: status " << to_string(r.status) << ", energy " << r.energy << " J, time "
            << r.total_time << " s, violation " << r.constraint_violation << ", iterations "
            << r.iterations << "\n";
  std::cout << "outputs in " << out_dir.string() << "\n";
  // meter-scale defect residuals at 1e-4 are negligible against the energy
  // scale; demanding full stationarity rejects healthy references
  const bool ok = r.status != SolveStatus::infeasible_step && r.constraint_violation <= 1e-4;
  return ok ? kExitOk : kExitRuntime;
}

bool expect(bool cond, const char* what, int& failures) {
  std::cout << "selftest: " << what << (cond ? " ... ok" : " ... FAIL") << "\n";
  if (!cond) ++failures;
  return cond;
}

int cmd_selftest() {
  int failures = 0;
  const VesselParams vp = sim_params();
  std::mt19937 rng(7u);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  {  // halving the step shrinks the one-vs-two-steps gap ~32x (5th order)
    VesselState s;
    s.u = 0.4;
    s.v = 0.05;
    s.r = 0.1;
    const ThrustCmd cmd{3.0, 2.0};
    const BodyWrench tau{0.01, -0.02, 0};
    const auto gap = [&](double h) {
      const VesselState a = step_discrete(s, cmd, tau, h, vp);
      VesselState b = step_discrete(s, cmd, tau, h / 2, vp);
      b = step_discrete(b, cmd, tau, h / 2, vp);
      return (a.vec() - b.vec()).cwiseAbs().maxCoeff();
    };
    const double g1 = gap(0.1), g2 = gap(0.05);
    const double order = std::log2(g1 / g2);
    expect(g1 < 1e-4 && order > 4.5 && order < 5.5, "integrator convergence order", failures);
  }
  {  // stage power is never below the task load
    bool ok = true;
    for (int i = 0; i < 100; ++i) {
      const ThrustCmd cmd{10 * unit(rng), 10 * unit(rng)};
      ok = ok && stage_power(cmd, vp) >= vp.T_w;
    }
    expect(ok, "stage power bounded below by task power", failures);
  }
  {  // yaw profile area recovers the commanded course change
    bool ok = true;
    for (int i = 0; i < 100; ++i) {
      const double psi_d = 3.0 * unit(rng);
      const double r_H = 0.5 * unit(rng);
      const double t_d = 0.5 + 9.5 * std::abs(unit(rng));
      const auto yp = build_yaw_profile(r_H, psi_d, t_d, 2.0);
      ok = ok && std::abs(profile_area(yp) - psi_d) < 1e-10 * std::max(1.0, std::abs(psi_d));
    }
    expect(ok, "yaw profile area equals course change", failures);
  }
  {  // turn-state thrusts reproduce the requested yaw acceleration
    bool ok = true;
    for (int i = 0; i < 100; ++i) {
      const double u = 0.1 + std::abs(unit(rng));
      const double r = 0.5 * unit(rng);
      const double rdot = 0.5 * unit(rng);
      const auto cmd = thrust_from_turn_state(u, r, rdot, vp);
      VesselState s;
      s.u = u;
      s.r = r;
      const auto dz = continuous_derivative(s, cmd, BodyWrench{}, vp);
      ok = ok && std::abs(dz[0]) < 1e-12 && std::abs(dz[2] - rdot) < 1e-10;
    }
    expect(ok, "turn-state thrust inversion", failures);
  }
  {  // grid CSV round-trip is exact at 17 digits
    const GridField g = make_demo_grid();
    const fs::path tmp = fs::temp_directory_path() / "asvempc_selftest_grid.csv";
    write_grid_csv(g, tmp.string());
    const GridField h = load_grid(tmp.string());
    fs::remove(tmp);
    const bool ok = (g.taux - h.taux).cwiseAbs().maxCoeff() == 0 &&
                    (g.tauy - h.tauy).cwiseAbs().maxCoeff() == 0 &&
                    (g.xs - h.xs).cwiseAbs().maxCoeff() == 0 &&
                    (g.ys - h.ys).cwiseAbs().maxCoeff() == 0;
    expect(ok, "grid file round-trip", failures);
  }
  {  // box-constrained quadratic solved to the clamped analytic optimum
    NlpProblem p;
    p.dim = 3;
    p.eq_dim = 0;
    const Eigen::Vector3d target(2.0, -3.0, 0.25);
    p.objective = [target](const Eigen::VectorXd& x) {
      return 0.5 * (x - target).squaredNorm();
    };
    p.lower = Eigen::VectorXd::Constant(3, -1.0);
    p.upper = Eigen::VectorXd::Constant(3, 1.0);
    SqpSolver solver;
    SolveOptions opt;
    opt.kkt_tolerance = 1e-8;
    opt.fd_step = 1e-5;
    const auto res = solver.solve(p, Eigen::VectorXd::Zero(3), opt);
    const Eigen::Vector3d want(1.0, -1.0, 0.25);
    expect(res.status == SolveStatus::converged &&
               (res.solution - want).cwiseAbs().maxCoeff() < 1e-6,
           "box-constrained quadratic solve", failures);
  }
  {  // waypoint switching advances one index per acceptance circle
    const PathState p0 = make_path({{2, 0}, {4, 0}}, 0.5, {0, 0});
    PathState p = update_active(p0, {0, 0});
    bool ok = p.active == 0;
    p = update_active(p, {1.6, 0});
    ok = ok && p.active == 1;
    p = update_active(p, {3.6, 0});
    ok = ok && p.active == 2 && mission_complete(p, {3.6, 0});
    expect(ok, "acceptance-circle switching", failures);
  }
  {  // terminal cost: zero cross-track error prices to zero penalty
    VesselParams vp2 = vp;
    vp2.T_w = 1.0;
    TerminalSnapshot snap;
    snap.u = 0.5;
    const Waypoint target{10, 0};
    const auto tc = terminal_cost(snap, target, 0.0, 2.0, 5.0, vp2, 2.0);
    const bool ok = tc.Y == 0.0 && std::abs(tc.E_s - static_power(0.5, vp2) * 5.0) < 1e-12;
    expect(ok, "terminal cost structure", failures);
  }
  {  // closed-loop determinism on a short run
    Scenario s = straight_leg_scenario();
    s.sim.max_sim_time = 5.0;
    const ControllerSpec& spec = s.controllers.front();
    const RunResult a = run_closed_loop(s, spec);
    const RunResult b = run_closed_loop(s, spec);
    bool ok = a.log.size() == b.log.size();
    for (size_t i = 0; ok && i < a.log.size(); ++i)
      ok = a.log[i].state.vec() == b.log[i].state.vec() && a.log[i].cmd.T1 == b.log[i].cmd.T1 &&
           a.log[i].cmd.T2 == b.log[i].cmd.T2;
    expect(ok, "closed-loop determinism", failures);
  }

  if (failures == 0) {
    std::cout << "selftest: all checks passed\n";
    return kExitOk;
  }
  std::cout << "selftest: " << failures << " check(s) failed\n";
  return kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"closed-loop waypoint-following simulation toolkit"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir;
  std::vector<std::string> only;
  std::vector<int> conditions;
  int nodes = 0;

  auto* run = app.add_subcommand("run", "simulate each controller once and write logs");
  run->add_option("scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--out", out_dir, "output directory (default: scenario out_dir or ./out)");
  run->add_option("--controller", only, "run only the named controller(s)");

  auto* compare = app.add_subcommand("compare", "rerun the scenario across disturbance conditions");
  compare->add_option("scenario", scenario_path, "scenario JSON file")->required();
  compare->add_option("--out", out_dir, "output directory");
  compare->add_option("--conditions", conditions, "condition numbers, default 1..5")
      ->check(CLI::Range(1, kNumConditions));

  auto* validate = app.add_subcommand("validate", "load a scenario and report problems");
  validate->add_option("scenario", scenario_path, "scenario JSON file")->required();

  auto* oracle = app.add_subcommand("oracle", "offline energy-optimal reference for the course");
  oracle->add_option("scenario", scenario_path, "scenario JSON file")->required();
  oracle->add_option("--out", out_dir, "output directory");
  oracle->add_option("--nodes", nodes, "collocation node count")->check(CLI::PositiveNumber);

  auto* selftest = app.add_subcommand("selftest", "run built-in invariant checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(scenario_path, out_dir, only);
    if (compare->parsed()) return cmd_compare(scenario_path, out_dir, conditions);
    if (validate->parsed()) return cmd_validate(scenario_path);
    if (oracle->parsed()) return cmd_oracle(scenario_path, out_dir, nodes);
    if (selftest->parsed()) return cmd_selftest();
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitScenario;
  } catch (const RunFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
