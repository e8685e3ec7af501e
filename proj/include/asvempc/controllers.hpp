#pragma once

#include "asvempc/disturbance_field.hpp"
#include "asvempc/empc_core.hpp"
#include "asvempc/nlp_solver.hpp"
#include "asvempc/path_manager.hpp"
#include "asvempc/vessel_model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace asvempc {

// Receding-horizon controller frontends. The energy-aware variants share one
// transcription: decision vector = interleaved thrust pairs over the horizon
// plus the terminal turn/cruise durations (t_d, t_s); states are rolled out
// by single shooting. The tracking baseline optimizes a quadratic offset to
// references marching along the active segment.

enum class ControllerVariant { cc_empc, eo_empc, nmpc };

const char* to_string(ControllerVariant v);
ControllerVariant variant_from_string(const std::string& s);

struct ControllerConfig {
  ControllerVariant variant{ControllerVariant::cc_empc};
  int horizon{10};
  double dt{0.1};  // control period [s], must equal the plant step

  // energy-aware terminal machinery
  double n{2.0};                  // yaw-profile phase divisor
  double y_scale{1.0};            // cross-track penalty multiplier (eo forces 0)
  double t_cap{1e4};              // upper bound on t_d and t_s [s]
  double t_d_min{1e-3};           // keeps the yaw profile away from t_d = 0
  double u_penalty_weight{1e4};   // soft weight on predicted surge going nonpositive
  double u_floor{1e-3};           // clamp for terminal-cost divisions [m/s]

  // tracking baseline weights on (u, v, r, x, y, psi) and the thrust pair
  Vec6<double> Q{(Vec6<double>() << 0, 0, 0, 10, 10, 1).finished()};
  Vec2<double> R{Vec2<double>(0.01, 0.01)};

  double u_ref{0.2};  // reference speed: cold-start cruise (EMPC), tracking speed (nmpc)
  bool warm_start{true};
  bool use_disturbance{false};  // prediction model samples the known field
  SolveOptions solver;

  void validate() const;  // throws std::invalid_argument
};

/// Defaults tuned for the shipped scenarios.
ControllerConfig default_empc_config(ControllerVariant v);
ControllerConfig default_nmpc_config();

struct HorizonDecision {
  Eigen::VectorXd z;  // layout.dim() entries
  HorizonLayout layout;
  ThrustCmd thrust_at(int k) const { return {z[2 * k], z[2 * k + 1]}; }
  double t_d() const { return z[2 * layout.horizon]; }
  double t_s() const { return z[2 * layout.horizon + 1]; }
};

struct StepDiagnostics {
  TerminalSnapshot terminal;  // predicted end-of-horizon state
  double stage_cost{0};       // horizon term of the objective
  double stage_energy{0};     // physical horizon energy [J]
  double E_d{0}, E_s{0}, Y{0};
  double penalty{0};          // surge-positivity soft penalty value
  double objective{0};        // equals stage_cost + E_d + E_s + Y + penalty
  double constraint_violation{0};
  double kkt_residual{0};
  SolveStatus status{SolveStatus::max_iter};
  bool fallback{false};  // solver output rejected, shifted previous decision used
  int iterations{0};
  double solve_time_ms{0};
  double d_terminal{0};      // predicted distance to the active waypoint [m]
  double min_predicted_u{0};  // smallest surge over the predicted horizon [m/s]
};

struct StepOutput {
  ThrustCmd cmd;
  HorizonDecision decision;
  StepDiagnostics diag;
};

StepOutput cc_empc_step(const VesselState& state, const PathState& path,
                        const ControllerConfig& config, const VesselParams& params,
                        const HorizonDecision* previous = nullptr,
                        const DisturbanceSpec* known_disturbance = nullptr);

StepOutput eo_empc_step(const VesselState& state, const PathState& path,
                        const ControllerConfig& config, const VesselParams& params,
                        const HorizonDecision* previous = nullptr,
                        const DisturbanceSpec* known_disturbance = nullptr);

StepOutput nmpc_step(const VesselState& state, const PathState& path,
                     const ControllerConfig& config, const VesselParams& params,
                     const HorizonDecision* previous = nullptr,
                     const DisturbanceSpec* known_disturbance = nullptr);

/// Stateful wrapper that carries the warm start between calls.
class Controller {
 public:
  Controller(ControllerConfig config, VesselParams params);
  StepOutput step(const VesselState& state, const PathState& path,
                  const DisturbanceSpec* known_disturbance = nullptr);
  void reset() { previous_.reset(); }
  const ControllerConfig& config() const { return config_; }

 private:
  ControllerConfig config_;
  VesselParams params_;
  std::optional<HorizonDecision> previous_;
};

// Whole-mission energy-optimal reference by direct collocation: states and
// thrusts at all nodes are decision variables, dynamics are RK4 defects, and
// waypoint passages pin distance-proportional nodes to the acceptance circle.
// Used as an offline oracle, not a controller.

struct OracleOptions {
  int nodes{40};
  SolveOptions solver;
  OracleOptions() {
    solver.max_iterations = 400;
    solver.kkt_tolerance = 1e-3;
    solver.constraint_tolerance = 1e-7;
  }
};

struct OracleResult {
  Eigen::MatrixXd states;    // nodes x 6 rows of (u, v, r, x, y, psi)
  Eigen::MatrixXd controls;  // (nodes-1) x 2 thrust pairs
  double total_time{0};      // [s]
  double energy{0};          // propulsion plus task energy [J]
  SolveStatus status{SolveStatus::max_iter};
  int iterations{0};
  double constraint_violation{0};
};

OracleResult collocation_oracle(const VesselParams& params, const VesselState& initial,
                                const std::vector<Waypoint>& waypoints, double r_coa,
                                const DisturbanceSpec& disturbance,
                                const OracleOptions& options = {});

}  // namespace asvempc
