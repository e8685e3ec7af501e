#pragma once

#include "asvempc/numeric.hpp"
#include "asvempc/path_manager.hpp"
#include "asvempc/vessel_model.hpp"

#include <cmath>
#include <stdexcept>

namespace asvempc {

// Terminal-cost machinery for the energy-aware controllers: the predicted
// motion beyond the horizon is decomposed into a turning phase (duration t_d,
// piecewise-linear yaw-rate profile) followed by straight cruising (duration
// t_s), each priced by an average power reconstructed from inverse dynamics.

template <typename Scalar>
struct TerminalSnapshotT {
  Scalar u{0};    // terminal surge [m/s], must be > 0 for cost evaluation
  Scalar v{0};    // terminal sway [m/s]
  Scalar r{0};    // terminal yaw rate [rad/s]
  Scalar x{0}, y{0};
  Scalar psi{0};  // terminal heading [rad], unwrapped
};
using TerminalSnapshot = TerminalSnapshotT<double>;

template <typename Scalar>
struct YawProfileT {
  Scalar r_H{0};    // initial yaw rate [rad/s]
  Scalar r_max{0};  // peak yaw rate [rad/s]
  Scalar a1{0};     // rise-phase angular acceleration [rad/s^2]
  Scalar a2{0};     // fall-phase angular acceleration [rad/s^2]
  Scalar t_d{0};    // total turn duration [s]
  Scalar n{2};      // phase split divisor, rise phase lasts t_d/n
};
using YawProfile = YawProfileT<double>;

template <typename Scalar>
struct TerminalCostT {
  Scalar E_d{0};  // turning-phase energy [J]
  Scalar E_s{0};  // cruising-phase energy [J]
  Scalar Y{0};    // energy-equivalent cross-track penalty [J]
  Scalar t_d{0}, t_s{0};
  Scalar total() const { return E_d + E_s + Y; }
};
using TerminalCost = TerminalCostT<double>;

/// Propulsion power needed to hold surge speed u against linear drag with
/// both thrusters sharing the load equally: 2*h_p(Xu*u/2).
template <typename Scalar>
Scalar surge_power(Scalar u, const VesselParamsT<Scalar>& p) {
  const Scalar per_thruster = p.Xu * u / Scalar(2);
  return Scalar(2) * thruster_power(per_thruster, p.alpha);
}

/// Average power while cruising straight: surge holding power plus task power.
template <typename Scalar>
Scalar static_power(Scalar u, const VesselParamsT<Scalar>& p) {
  return surge_power(u, p) + p.T_w;
}

/// Signed angle from the current course-over-ground to the bearing of the
/// target, wrapped to (-pi, pi].
template <typename Scalar>
Scalar course_error(const TerminalSnapshotT<Scalar>& s, const Waypoint& target) {
  if (!(s.u > Scalar(0))) throw std::domain_error("course error: surge speed must be positive");
  using std::atan;
  using std::atan2;
  const Scalar bearing = atan2(Scalar(target.y) - s.y, Scalar(target.x) - s.x);
  const Scalar drift = atan(s.v / s.u);  // crab angle from sideslip
  return wrap_angle(bearing - drift - s.psi);
}

/// Piecewise-linear yaw-rate plan: rise r_H -> r_max over [0, t_d/n], fall
/// r_max -> 0 over the rest. r_max is chosen so the integral equals psi_d.
template <typename Scalar>
YawProfileT<Scalar> build_yaw_profile(Scalar r_H, Scalar psi_d, Scalar t_d, Scalar n) {
  if (!(t_d > Scalar(0))) throw std::domain_error("yaw profile: turn duration must be positive");
  if (!(n > Scalar(1))) throw std::domain_error("yaw profile: phase divisor must exceed 1");
  YawProfileT<Scalar> yp;
  yp.r_H = r_H;
  yp.t_d = t_d;
  yp.n = n;
  yp.r_max = Scalar(2) * psi_d / t_d - r_H / n;
  yp.a1 = n * (yp.r_max - r_H) / t_d;
  yp.a2 = -n * yp.r_max / ((n - Scalar(1)) * t_d);
  return yp;
}

/// Yaw rate at time tau in [0, t_d] along the profile.
template <typename Scalar>
Scalar profile_rate(const YawProfileT<Scalar>& yp, Scalar tau) {
  const Scalar t_break = yp.t_d / yp.n;
  if (tau <= t_break) return yp.r_H + yp.a1 * tau;
  return yp.r_max + yp.a2 * (tau - t_break);
}

/// Angular acceleration at time tau (left slope at the break).
template <typename Scalar>
Scalar profile_accel(const YawProfileT<Scalar>& yp, Scalar tau) {
  return tau <= yp.t_d / yp.n ? yp.a1 : yp.a2;
}

/// Closed-form area under the profile; equals the commanded course change.
template <typename Scalar>
Scalar profile_area(const YawProfileT<Scalar>& yp) {
  const Scalar rise = (yp.r_H + yp.r_max) / Scalar(2) * (yp.t_d / yp.n);
  const Scalar fall = yp.r_max / Scalar(2) * (yp.t_d * (yp.n - Scalar(1)) / yp.n);
  return rise + fall;
}

/// Thruster pair holding surge speed u while producing yaw state (r, rdot),
/// assuming negligible sway: T1+T2 balances drag, the differential supplies
/// the yaw moment.
template <typename Scalar>
ThrustCmdT<Scalar> thrust_from_turn_state(Scalar u, Scalar r, Scalar rdot,
                                          const VesselParamsT<Scalar>& p) {
  const Scalar sum = p.Xu * u;
  const Scalar diff = (p.m33 * rdot + p.Nr * r) / p.l;
  return {(sum + diff) / Scalar(2), (sum - diff) / Scalar(2)};
}

namespace detail {
template <typename Scalar>
Scalar node_power(Scalar u, Scalar r, Scalar rdot, const VesselParamsT<Scalar>& p) {
  const auto cmd = thrust_from_turn_state(u, r, rdot, p);
  return thruster_power(cmd.T1, p.alpha) + thruster_power(cmd.T2, p.alpha);
}
}  // namespace detail

/// Average power over the turning phase: trapezoid rule on each linear
/// segment of the profile, with the break node evaluated on both slopes,
/// weighted by the phase durations t_d/n and t_d*(n-1)/n.
template <typename Scalar>
Scalar dynamic_power(const YawProfileT<Scalar>& yp, Scalar u_H, const VesselParamsT<Scalar>& p) {
  const Scalar p_rise_0 = detail::node_power(u_H, yp.r_H, yp.a1, p);
  const Scalar p_rise_1 = detail::node_power(u_H, yp.r_max, yp.a1, p);
  const Scalar p_fall_0 = detail::node_power(u_H, yp.r_max, yp.a2, p);
  const Scalar p_fall_1 = detail::node_power(u_H, Scalar(0), yp.a2, p);
  return (p_rise_0 + p_rise_1) / (Scalar(2) * yp.n) +
         (yp.n - Scalar(1)) * (p_fall_0 + p_fall_1) / (Scalar(2) * yp.n) + p.T_w;
}

/// Cross-track deviation priced as the energy to cruise the extra distance:
/// (e / u) * surge holding power, in joules.
template <typename Scalar>
Scalar track_error_cost(Scalar e, Scalar u_H, const VesselParamsT<Scalar>& p) {
  if (!(u_H > Scalar(0))) throw std::domain_error("track error cost: surge speed must be positive");
  return e / u_H * surge_power(u_H, p);
}

/// sin(x)/x with a series fallback near zero so the solver never sees 0/0.
template <typename Scalar>
Scalar sinc_stable(Scalar x) {
  using std::abs;
  using std::sin;
  if (abs(x) < Scalar(1e-4)) {
    const Scalar x2 = x * x;
    return Scalar(1) - x2 / Scalar(6) + x2 * x2 / Scalar(120);
  }
  return sin(x) / x;
}

/// Residual of the travel-time split: distance covered in the turn (chord of
/// the course change) plus the cruise distance must equal the distance to the
/// target. Zero at feasible (t_d, t_s).
template <typename Scalar>
Scalar time_split_residual(const TerminalSnapshotT<Scalar>& s, const Waypoint& target,
                           Scalar t_d, Scalar t_s) {
  using std::sqrt;
  const Scalar dpsi = course_error(s, target);
  const Scalar dx = Scalar(target.x) - s.x;
  const Scalar dy = Scalar(target.y) - s.y;
  const Scalar d = sqrt(dx * dx + dy * dy);
  return s.u * (t_d * sinc_stable(dpsi) + t_s) - d;
}

/// Full terminal cost: turning energy P_d*t_d, cruising energy P_s*t_s, and
/// the cross-track penalty Y (scaled by y_scale; 0 drops the penalty).
template <typename Scalar>
TerminalCostT<Scalar> terminal_cost(const TerminalSnapshotT<Scalar>& s, const Waypoint& target,
                                    Scalar e, Scalar t_d, Scalar t_s,
                                    const VesselParamsT<Scalar>& p, Scalar n,
                                    Scalar y_scale = Scalar(1)) {
  const Scalar dpsi = course_error(s, target);
  const auto yp = build_yaw_profile(s.r, dpsi, t_d, n);
  TerminalCostT<Scalar> tc;
  tc.t_d = t_d;
  tc.t_s = t_s;
  tc.E_d = dynamic_power(yp, s.u, p) * t_d;
  tc.E_s = static_power(s.u, p) * t_s;
  tc.Y = y_scale * track_error_cost(e, s.u, p);
  return tc;
}

}  // namespace asvempc
