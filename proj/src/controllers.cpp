#include "asvempc/controllers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace asvempc {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}
}  // namespace

const char* to_string(ControllerVariant v) {
  switch (v) {
    case ControllerVariant::cc_empc: return "cc_empc";
    case ControllerVariant::eo_empc: return "eo_empc";
    case ControllerVariant::nmpc: return "nmpc";
  }
  return "unknown";
}

ControllerVariant variant_from_string(const std::string& s) {
  if (s == "cc_empc") return ControllerVariant::cc_empc;
  if (s == "eo_empc") return ControllerVariant::eo_empc;
  if (s == "nmpc") return ControllerVariant::nmpc;
  throw std::invalid_argument("unknown controller variant: " + s);
}

void ControllerConfig::validate() const {
  if (horizon < 2) throw std::invalid_argument("controller: horizon must be at least 2");
  if (!(dt > 0)) throw std::invalid_argument("controller: dt must be positive");
  if (!(u_ref > 0)) throw std::invalid_argument("controller: u_ref must be positive");
  if (!(n > 1)) throw std::invalid_argument("controller: yaw-profile divisor must exceed 1");
  if (!(t_d_min > 0) || !(t_cap > t_d_min))
    throw std::invalid_argument("controller: need 0 < t_d_min < t_cap");
  if (y_scale < 0) throw std::invalid_argument("controller: y_scale must be nonnegative");
  if (u_penalty_weight < 0)
    throw std::invalid_argument("controller: penalty weight must be nonnegative");
  if (!(u_floor > 0)) throw std::invalid_argument("controller: u_floor must be positive");
  if ((Q.array() < 0).any() || (R.array() < 0).any())
    throw std::invalid_argument("controller: tracking weights must be nonnegative");
}

ControllerConfig default_empc_config(ControllerVariant v) {
  if (v == ControllerVariant::nmpc)
    throw std::invalid_argument("default_empc_config: use default_nmpc_config for nmpc");
  ControllerConfig c;
  c.variant = v;
  c.u_ref = 0.2;
  c.solver.max_iterations = 60;
  c.solver.kkt_tolerance = 1e-4;
  c.solver.constraint_tolerance = 1e-7;
  c.solver.fd_step = 1e-6;
  return c;
}

ControllerConfig default_nmpc_config() {
  ControllerConfig c;
  c.variant = ControllerVariant::nmpc;
  c.u_ref = 3.0;
  c.solver.max_iterations = 60;
  c.solver.kkt_tolerance = 1e-3;
  c.solver.constraint_tolerance = 1e-6;
  c.solver.fd_step = 1e-6;
  return c;
}

namespace {

struct EmpcParts {
  double stage{0};
  double penalty{0};
  double E_d{0}, E_s{0}, Y{0};
  VesselState terminal;
  double min_u{0};
  double d{0};
  double residual{0};
};

// single-shooting evaluation shared by the objective, the constraint, and the
// diagnostics so every reported number comes from one arithmetic path
struct EmpcEval {
  const VesselState* state;
  const PathState* path;
  const ControllerConfig* cfg;
  const VesselParams* params;
  const DisturbanceSpec* known;
  Waypoint target;
  double y_scale;

  EmpcParts parts(const Eigen::VectorXd& z) const {
    const int H = cfg->horizon;
    VesselState X = *state;
    EmpcParts p;
    double pen = 0;
    p.min_u = std::numeric_limits<double>::infinity();
    for (int k = 0; k < H; ++k) {
      const ThrustCmd cmd{z[2 * k], z[2 * k + 1]};
      p.stage += stage_power(cmd, *params) * cfg->dt;
      BodyWrench tau{0, 0, 0};
      if (known) tau = sample(*known, X.position(), X.psi);
      X = step_discrete(X, cmd, tau, cfg->dt, *params);
      p.min_u = std::min(p.min_u, X.u);
      if (X.u < 0) pen += X.u * X.u;
    }
    p.penalty = cfg->u_penalty_weight * pen;
    p.terminal = X;
    TerminalSnapshot snap{std::max(X.u, cfg->u_floor), X.v, X.r, X.x, X.y, X.psi};
    const double e = cross_track_error(*path, X.position());
    const double t_d = z[2 * H];
    const double t_s = z[2 * H + 1];
    const TerminalCost tc = terminal_cost(snap, target, e, t_d, t_s, *params, cfg->n, y_scale);
    p.E_d = tc.E_d;
    p.E_s = tc.E_s;
    p.Y = tc.Y;
    p.d = std::hypot(target.x - X.x, target.y - X.y);
    p.residual = time_split_residual(snap, target, t_d, t_s);
    return p;
  }

  static double objective_of(const EmpcParts& p) {
    return p.stage + p.E_d + p.E_s + p.Y + p.penalty;
  }
};

StepOutput empc_step_impl(const VesselState& state, const PathState& path,
                          const ControllerConfig& cfg, const VesselParams& params,
                          const HorizonDecision* previous, const DisturbanceSpec* known,
                          double y_scale) {
  cfg.validate();
  params.validate();
  const Waypoint target = active_target(path);
  const int H = cfg.horizon;
  const HorizonLayout layout{H, cfg.dt, true};
  const int dim = layout.dim();

  EmpcEval eval{&state, &path, &cfg, &params,
                cfg.use_disturbance ? known : nullptr, target, y_scale};

  NlpProblem prob;
  prob.dim = dim;
  prob.eq_dim = 1;
  prob.objective = [eval](const Eigen::VectorXd& z) {
    try {
      return EmpcEval::objective_of(eval.parts(z));
    } catch (const std::exception&) {
      return kNan;
    }
  };
  prob.fused = [eval](const Eigen::VectorXd& z, double& f, Eigen::VectorXd& c) {
    try {
      const EmpcParts p = eval.parts(z);
      f = EmpcEval::objective_of(p);
      c = Eigen::VectorXd::Constant(1, p.residual);
    } catch (const std::exception&) {
      f = kNan;
      c = Eigen::VectorXd::Constant(1, kNan);
    }
  };
  prob.lower.resize(dim);
  prob.upper.resize(dim);
  for (int k = 0; k < 2 * H; ++k) {
    prob.lower[k] = -params.T_max;
    prob.upper[k] = params.T_max;
  }
  prob.lower[2 * H] = cfg.t_d_min;
  prob.upper[2 * H] = cfg.t_cap;
  prob.lower[2 * H + 1] = 0;
  prob.upper[2 * H + 1] = cfg.t_cap;

  const double d0 = std::hypot(target.x - state.x, target.y - state.y);
  Eigen::VectorXd z0;
  const bool warm = previous && cfg.warm_start && previous->layout.has_terminal_times &&
                    previous->layout.horizon == H && previous->z.size() == dim;
  if (warm) {
    z0 = warm_start_shift(previous->z, HorizonLayout{H, cfg.dt, true});
  } else {
    z0.resize(dim);
    const double T0 = std::clamp(params.Xu * cfg.u_ref / 2, -params.T_max, params.T_max);
    for (int k = 0; k < 2 * H; ++k) z0[k] = T0;
    z0[2 * H] = 1.0;
    z0[2 * H + 1] = d0 / cfg.u_ref;
  }
  z0 = z0.cwiseMax(prob.lower).cwiseMin(prob.upper);

  SqpSolver solver;
  const double t0 = now_ms();
  const SolveResult res = solver.solve(prob, z0, cfg.solver);
  const double elapsed = now_ms() - t0;

  const bool rejected = res.status == SolveStatus::infeasible_step ||
                        !res.solution.allFinite() || !std::isfinite(res.objective) ||
                        res.constraint_violation > 1e-3 * std::max(1.0, d0);
  const Eigen::VectorXd& z_used = rejected ? z0 : res.solution;

  const EmpcParts dp = eval.parts(z_used);
  StepOutput out;
  out.cmd = {z_used[0], z_used[1]};
  out.decision = {z_used, layout};
  StepDiagnostics& dg = out.diag;
  dg.terminal = {dp.terminal.u, dp.terminal.v, dp.terminal.r,
                 dp.terminal.x, dp.terminal.y, dp.terminal.psi};
  dg.stage_cost = dp.stage;
  dg.stage_energy = dp.stage;
  dg.E_d = dp.E_d;
  dg.E_s = dp.E_s;
  dg.Y = dp.Y;
  dg.penalty = dp.penalty;
  dg.objective = EmpcEval::objective_of(dp);
  dg.constraint_violation = std::abs(dp.residual);
  dg.kkt_residual = res.kkt_residual;
  dg.status = res.status;
  dg.fallback = rejected;
  dg.iterations = res.iterations;
  dg.solve_time_ms = elapsed;
  dg.d_terminal = dp.d;
  dg.min_predicted_u = dp.min_u;
  return out;
}

}  // namespace

StepOutput cc_empc_step(const VesselState& state, const PathState& path,
                        const ControllerConfig& config, const VesselParams& params,
                        const HorizonDecision* previous, const DisturbanceSpec* known) {
  return empc_step_impl(state, path, config, params, previous, known, config.y_scale);
}

StepOutput eo_empc_step(const VesselState& state, const PathState& path,
                        const ControllerConfig& config, const VesselParams& params,
                        const HorizonDecision* previous, const DisturbanceSpec* known) {
  return empc_step_impl(state, path, config, params, previous, known, 0.0);
}

StepOutput nmpc_step(const VesselState& state, const PathState& path,
                     const ControllerConfig& config, const VesselParams& params,
                     const HorizonDecision* previous, const DisturbanceSpec* known) {
  config.validate();
  params.validate();
  const Waypoint target = active_target(path);
  const Waypoint anchor = previous_anchor(path);
  const int H = config.horizon;
  const HorizonLayout layout{H, config.dt, false};
  const int dim = layout.dim();

  const Eigen::Vector2d a = anchor.vec();
  const Eigen::Vector2d b = target.vec();
  const double len = (b - a).norm();
  const Eigen::Vector2d dir = (b - a) / len;
  const double seg_angle = std::atan2(dir.y(), dir.x());
  const double psi_ref = state.psi + wrap_angle(seg_angle - state.psi);
  const double s0 = std::clamp((state.position() - a).dot(dir), 0.0, len);

  std::vector<Vec6<double>> refs(H);
  for (int k = 0; k < H; ++k) {
    const double s = std::min(s0 + config.u_ref * config.dt * (k + 1), len);
    const Eigen::Vector2d p = a + s * dir;
    refs[k] << config.u_ref, 0, 0, p.x(), p.y(), psi_ref;
  }

  struct NmpcParts {
    double cost{0};
    double energy{0};
    VesselState terminal;
    double min_u{0};
  };
  const DisturbanceSpec* field = config.use_disturbance ? known : nullptr;
  const auto rollout = [&](const Eigen::VectorXd& z) {
    NmpcParts p;
    VesselState X = state;
    p.min_u = std::numeric_limits<double>::infinity();
    for (int k = 0; k < H; ++k) {
      const ThrustCmd cmd{z[2 * k], z[2 * k + 1]};
      p.energy += stage_power(cmd, params) * config.dt;
      BodyWrench tau{0, 0, 0};
      if (field) tau = sample(*field, X.position(), X.psi);
      X = step_discrete(X, cmd, tau, config.dt, params);
      const Vec6<double> dx = X.vec() - refs[k];
      p.cost += dx.dot(config.Q.asDiagonal() * dx) +
                cmd.T1 * cmd.T1 * config.R[0] + cmd.T2 * cmd.T2 * config.R[1];
      p.min_u = std::min(p.min_u, X.u);
    }
    p.terminal = X;
    return p;
  };

  NlpProblem prob;
  prob.dim = dim;
  prob.eq_dim = 0;
  prob.objective = [&rollout](const Eigen::VectorXd& z) {
    try {
      return rollout(z).cost;
    } catch (const std::exception&) {
      return kNan;
    }
  };
  prob.fused = [&rollout](const Eigen::VectorXd& z, double& f, Eigen::VectorXd& c) {
    try {
      f = rollout(z).cost;
    } catch (const std::exception&) {
      f = kNan;
    }
    c.resize(0);
  };
  prob.lower = Eigen::VectorXd::Constant(dim, -params.T_max);
  prob.upper = Eigen::VectorXd::Constant(dim, params.T_max);

  Eigen::VectorXd z0;
  const bool warm = previous && config.warm_start && !previous->layout.has_terminal_times &&
                    previous->layout.horizon == H && previous->z.size() == dim;
  if (warm) {
    z0 = warm_start_shift(previous->z, HorizonLayout{H, config.dt, false});
  } else {
    const double T0 = std::clamp(params.Xu * config.u_ref / 2, -params.T_max, params.T_max);
    z0 = Eigen::VectorXd::Constant(dim, T0);
  }
  z0 = z0.cwiseMax(prob.lower).cwiseMin(prob.upper);

  SqpSolver solver;
  const double t0 = now_ms();
  const SolveResult res = solver.solve(prob, z0, config.solver);
  const double elapsed = now_ms() - t0;

  const bool rejected = res.status == SolveStatus::infeasible_step ||
                        !res.solution.allFinite() || !std::isfinite(res.objective);
  const Eigen::VectorXd& z_used = rejected ? z0 : res.solution;

  const NmpcParts dp = rollout(z_used);
  StepOutput out;
  out.cmd = {z_used[0], z_used[1]};
  out.decision = {z_used, layout};
  StepDiagnostics& dg = out.diag;
  dg.terminal = {dp.terminal.u, dp.terminal.v, dp.terminal.r,
                 dp.terminal.x, dp.terminal.y, dp.terminal.psi};
  dg.stage_cost = dp.cost;
  dg.stage_energy = dp.energy;
  dg.objective = dp.cost;
  dg.kkt_residual = res.kkt_residual;
  dg.status = res.status;
  dg.fallback = rejected;
  dg.iterations = res.iterations;
  dg.solve_time_ms = elapsed;
  dg.d_terminal = std::hypot(target.x - dp.terminal.x, target.y - dp.terminal.y);
  dg.min_predicted_u = dp.min_u;
  return out;
}

Controller::Controller(ControllerConfig config, VesselParams params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  params_.validate();
}

StepOutput Controller::step(const VesselState& state, const PathState& path,
                            const DisturbanceSpec* known_disturbance) {
  const HorizonDecision* prev = previous_ ? &*previous_ : nullptr;
  StepOutput out;
  switch (config_.variant) {
    case ControllerVariant::cc_empc:
      out = cc_empc_step(state, path, config_, params_, prev, known_disturbance);
      break;
    case ControllerVariant::eo_empc:
      out = eo_empc_step(state, path, config_, params_, prev, known_disturbance);
      break;
    case ControllerVariant::nmpc:
      out = nmpc_step(state, path, config_, params_, prev, known_disturbance);
      break;
  }
  previous_ = out.decision;
  return out;
}

namespace {

// arc-length parameterization of the start -> waypoints polyline
struct Polyline {
  std::vector<Eigen::Vector2d> pts;
  std::vector<double> cum;

  explicit Polyline(const Eigen::Vector2d& start, const std::vector<Waypoint>& wps) {
    pts.push_back(start);
    for (const auto& w : wps) pts.push_back(w.vec());
    cum.resize(pts.size());
    cum[0] = 0;
    for (size_t i = 1; i < pts.size(); ++i)
      cum[i] = cum[i - 1] + std::max((pts[i] - pts[i - 1]).norm(), 1e-12);
  }
  double length() const { return cum.back(); }
  void locate(double s, Eigen::Vector2d& p, double& heading) const {
    s = std::clamp(s, 0.0, length());
    size_t i = 0;
    while (i + 2 < pts.size() && s > cum[i + 1]) ++i;
    const double seg = cum[i + 1] - cum[i];
    const double t = (s - cum[i]) / seg;
    const Eigen::Vector2d d = pts[i + 1] - pts[i];
    p = pts[i] + t * d;
    heading = std::atan2(d.y(), d.x());
  }
};

}  // namespace

OracleResult collocation_oracle(const VesselParams& params, const VesselState& initial,
                                const std::vector<Waypoint>& waypoints, double r_coa,
                                const DisturbanceSpec& disturbance,
                                const OracleOptions& options) {
  params.validate();
  if (waypoints.empty()) throw std::invalid_argument("oracle: at least one waypoint required");
  if (!(r_coa > 0)) throw std::invalid_argument("oracle: acceptance radius must be positive");
  const int N = options.nodes;
  const int W = static_cast<int>(waypoints.size());
  if (N < W + 2) throw std::invalid_argument("oracle: node count too small for waypoint passages");

  OracleResult out;
  bool trivial = true;
  for (const auto& w : waypoints)
    if ((w.vec() - initial.position()).norm() > r_coa) trivial = false;
  if (trivial) {
    out.states = initial.vec().transpose();
    out.controls.resize(0, 2);
    out.status = SolveStatus::converged;
    return out;
  }

  const Polyline pl(initial.position(), waypoints);
  const double L = pl.length();

  // pin waypoint passages to distance-proportional nodes, last at the final node
  std::vector<int> pass(W);
  for (int i = 0; i < W; ++i) {
    pass[i] = static_cast<int>(std::lround(pl.cum[i + 1] / L * (N - 1)));
    if (i > 0) pass[i] = std::max(pass[i], pass[i - 1] + 1);
  }
  pass[W - 1] = N - 1;
  for (int i = W - 2; i >= 0; --i) pass[i] = std::min(pass[i], pass[i + 1] - 1);
  if (pass[0] < 1) throw std::invalid_argument("oracle: node count too small for waypoint passages");

  const int dim = 1 + 8 * (N - 1);
  const int m = 6 * (N - 1) + W;
  const auto idxX = [](int j) { return 1 + 8 * (j - 1); };      // state of node j >= 1
  const auto idxU = [&](int j) { return idxX(j) + 6; };         // control of interval j-1

  NlpProblem prob;
  prob.dim = dim;
  prob.eq_dim = m;
  prob.lower.resize(dim);
  prob.upper.resize(dim);
  prob.lower[0] = 1e-2;
  prob.upper[0] = 1e4;
  for (int j = 1; j < N; ++j) {
    const int sx = idxX(j);
    prob.lower[sx + 0] = 1e-3;  prob.upper[sx + 0] = 50;    // u stays positive
    prob.lower[sx + 1] = -50;   prob.upper[sx + 1] = 50;
    prob.lower[sx + 2] = -50;   prob.upper[sx + 2] = 50;
    prob.lower[sx + 3] = -1e6;  prob.upper[sx + 3] = 1e6;
    prob.lower[sx + 4] = -1e6;  prob.upper[sx + 4] = 1e6;
    prob.lower[sx + 5] = -1e3;  prob.upper[sx + 5] = 1e3;
    prob.lower[idxU(j)] = -params.T_max;
    prob.upper[idxU(j)] = params.T_max;
    prob.lower[idxU(j) + 1] = -params.T_max;
    prob.upper[idxU(j) + 1] = params.T_max;
  }

  prob.fused = [&](const Eigen::VectorXd& z, double& f, Eigen::VectorXd& c) {
    try {
      const double h = z[0] / (N - 1);
      f = 0;
      c.resize(m);
      VesselState prev = initial;
      for (int j = 1; j < N; ++j) {
        const ThrustCmd cmd{z[idxU(j)], z[idxU(j) + 1]};
        f += stage_power(cmd, params) * h;
        const BodyWrench tau = sample(disturbance, prev.position(), prev.psi);
        const VesselState pred = step_discrete(prev, cmd, tau, h, params);
        const VesselState node = VesselState::from_vec(z.segment<6>(idxX(j)));
        c.segment<6>(6 * (j - 1)) = node.vec() - pred.vec();
        prev = node;
      }
      for (int i = 0; i < W; ++i) {
        const int sx = idxX(pass[i]);
        const Eigen::Vector2d p(z[sx + 3], z[sx + 4]);
        c[6 * (N - 1) + i] = (p - waypoints[i].vec()).squaredNorm() - r_coa * r_coa;
      }
    } catch (const std::exception&) {
      f = kNan;
      c = Eigen::VectorXd::Constant(m, kNan);
    }
  };

  // near-feasible start: march the polyline at the economical cruise speed
  double u_c = params.T_w > 0 ? std::sqrt(2 * params.T_w / (params.alpha * params.Xu * params.Xu))
                              : 0.1;
  u_c = std::clamp(u_c, 0.02, 1.0);
  Eigen::VectorXd z0(dim);
  z0[0] = std::clamp(L / u_c, prob.lower[0], prob.upper[0]);
  const double T0 = std::clamp(params.Xu * u_c / 2, -params.T_max, params.T_max);
  for (int j = 1; j < N; ++j) {
    Eigen::Vector2d p;
    double heading;
    pl.locate(L * j / (N - 1), p, heading);
    const int sx = idxX(j);
    z0[sx + 0] = u_c;
    z0[sx + 1] = 0;
    z0[sx + 2] = 0;
    z0[sx + 3] = p.x();
    z0[sx + 4] = p.y();
    z0[sx + 5] = heading;
    z0[idxU(j)] = T0;
    z0[idxU(j) + 1] = T0;
  }
  z0 = z0.cwiseMax(prob.lower).cwiseMin(prob.upper);

  SqpSolver solver;
  const SolveResult res = solver.solve(prob, z0, options.solver);

  out.total_time = res.solution[0];
  out.energy = res.objective;
  out.status = res.status;
  out.iterations = res.iterations;
  out.constraint_violation = res.constraint_violation;
  out.states.resize(N, 6);
  out.states.row(0) = initial.vec().transpose();
  out.controls.resize(N - 1, 2);
  for (int j = 1; j < N; ++j) {
    out.states.row(j) = res.solution.segment<6>(idxX(j)).transpose();
    out.controls(j - 1, 0) = res.solution[idxU(j)];
    out.controls(j - 1, 1) = res.solution[idxU(j) + 1];
  }
  return out;
}

}  // namespace asvempc
