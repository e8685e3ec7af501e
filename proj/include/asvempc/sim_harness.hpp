#pragma once

#include "asvempc/controllers.hpp"
#include "asvempc/scenario.hpp"

#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace asvempc {

// Closed-loop driver: runs one controller over a scenario at a fixed control
// period, logs the applied commands and resulting motion, and reduces the log
// to the energy / accuracy / time metrics used in the comparison table.

struct LogRow {
  double t{0};          // [s], start of the control period
  VesselState state;    // state the controller saw (pre-step)
  ThrustCmd cmd;        // applied thrust after clamping / dead zone
  double tau_u{0}, tau_v{0};  // disturbance wrench sampled at the pre-step pose [N]
  double power{0};      // stage power of the applied command [W]
  double e{0};          // gated cross-track error [m]
  int wp_index{0};      // active waypoint when the row was logged
};

using TrajectoryLog = std::vector<LogRow>;

struct SolveTimeStats {
  double mean{0}, p95{0}, max{0};  // [ms], all zero when no solves happened
};

struct RunMetrics {
  double energy{0};  // integral of logged power [J]
  std::optional<double> avg_cross_track;  // mean |e| outside all COAs [m]
  std::optional<double> travel_time;      // [s], absent when incomplete
  bool complete{false};
  SolveTimeStats solve_time_ms;
  int steps{0};             // controller invocations
  int solver_fallbacks{0};  // rejected solves that fell back to the shifted guess
};

/// Per-step solver bookkeeping kept alongside the trajectory.
struct SolveRecord {
  double t{0};
  SolveStatus status{SolveStatus::max_iter};
  bool fallback{false};
  double constraint_violation{0};
  double kkt_residual{0};
  int iterations{0};
  double solve_time_ms{0};
  double d_terminal{0};
  double min_predicted_u{0};
  double max_abs_thrust{0};  // of the applied command [N]
};

struct RunResult {
  TrajectoryLog log;
  RunMetrics metrics;
  std::vector<SolveRecord> solves;
};

/// Unrecoverable runtime problem: diverged plant state or a controller that
/// keeps failing. Distinct from ScenarioError (bad input).
class RunFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Simulate one controller through the scenario. Throws RunFailure on a
/// non-finite plant state or more than ten consecutive rejected solves.
RunResult run_closed_loop(const Scenario& scenario, const ControllerSpec& spec);

/// Reduce a trajectory log to metrics by replaying waypoint switching.
/// Solve-time fields are left zero; run_closed_loop fills them from its
/// solve records.
RunMetrics compute_metrics(const TrajectoryLog& log, const Scenario& scenario);

/// Trajectory CSV with a fixed header; 17 significant digits so values
/// round-trip bitwise through import_trajectory.
void export_trajectory(const TrajectoryLog& log, const std::string& path);
TrajectoryLog import_trajectory(const std::string& path);

/// Metrics as a JSON object; absent optionals serialize as null.
std::string metrics_json_string(const RunMetrics& m);
void export_metrics(const RunMetrics& m, const std::string& path);

// Comparison across disturbance conditions: the base scenario is rerun per
// condition with only the disturbance swapped.

struct ComparisonEntry {
  int condition{0};
  std::string controller;
  ControllerVariant variant{ControllerVariant::cc_empc};
  RunResult result;
};

struct Comparison {
  std::vector<int> conditions;
  std::vector<std::string> controllers;
  std::vector<ComparisonEntry> entries;  // condition-major, controller order preserved
};

/// Run every controller in the scenario under each condition (1..5). The
/// scenario's grid_csv, when set, provides the spatial field for condition 5.
/// `progress`, when non-null, receives one line per finished run.
Comparison run_comparison(const Scenario& base, const std::vector<int>& conditions,
                          std::ostream* progress = nullptr);

std::string render_comparison_text(const Comparison& c);
std::string comparison_json_string(const Comparison& c);

/// Offline energy-optimal reference for the scenario's course.
OracleResult run_oracle(const Scenario& scenario, const OracleOptions& options = {});

/// Node states and interval thrusts of an oracle solution as CSV.
void export_oracle_csv(const OracleResult& r, const std::string& path);

}  // namespace asvempc
