#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "asvempc/numeric.hpp"

namespace asvempc {

// 3-DOF maneuvering model of a twin-thruster surface vehicle: diagonal
// inertia (rigid body plus added mass), skew-symmetric Coriolis coupling,
// linear damping, planar kinematics, quadratic thruster power law.

template <typename Scalar>
struct VesselParamsT {
  Scalar m11{0};   // surge inertia [kg]
  Scalar m22{0};   // sway inertia [kg]
  Scalar m33{0};   // yaw inertia [kg m^2/rad]
  Scalar Xu{0};    // surge damping [kg/s]
  Scalar Yv{0};    // sway damping [kg/s]
  Scalar Nr{0};    // yaw damping [kg m^2/(s rad)]
  Scalar l{0};     // thruster offset from centerline [m]
  Scalar T_max{0}; // per-thruster thrust bound [N]
  Scalar T_min{0}; // dead-zone boundary [N]; 0 disables quantization
  Scalar alpha{0}; // thrust-to-power ratio [W/N^2]
  Scalar T_w{0};   // average task power drawn while underway [W]

  void validate() const {
    auto fail = [](const std::string& what) {
      throw std::invalid_argument("vessel params: " + what);
    };
    if (!(m11 > 0) || !(m22 > 0) || !(m33 > 0)) fail("inertias must be positive");
    if (!(Xu >= 0) || !(Yv >= 0) || !(Nr >= 0)) fail("damping must be non-negative");
    if (!(l > 0)) fail("thruster arm must be positive");
    if (!(T_min >= 0) || !(T_max > T_min)) fail("thrust bounds require T_max > T_min >= 0");
    if (!(alpha > 0)) fail("power ratio must be positive");
    if (!(T_w >= 0)) fail("task power must be non-negative");
  }
};

using VesselParams = VesselParamsT<double>;

// Bench-identified parameter set of the physical vehicle.
inline VesselParams table2_params() {
  VesselParams p;
  p.m11 = 12.84;
  p.m22 = 10.65;
  p.m33 = 1.86;
  p.Xu = 33.57;
  p.Yv = 50.78;
  p.Nr = 0.31;
  p.l = 0.1025;
  p.T_max = 75.0;
  p.T_min = 10.0;
  p.alpha = 0.4364;
  p.T_w = 0.0;
  return p;
}

// Simulation preset: same hull with thrust capped at 10 N and no dead zone.
inline VesselParams sim_params() {
  VesselParams p = table2_params();
  p.T_max = 10.0;
  p.T_min = 0.0;
  return p;
}

inline VesselParams params_preset(const std::string& name) {
  if (name == "table2") return table2_params();
  if (name == "sim") return sim_params();
  throw std::invalid_argument("unknown vessel preset '" + name + "' (expected 'table2' or 'sim')");
}

template <typename Scalar>
struct VesselStateT {
  Scalar u{0}, v{0}, r{0};    // body velocities [m/s, m/s, rad/s]
  Scalar x{0}, y{0}, psi{0};  // inertial pose [m, m, rad]; psi kept unwrapped

  Vec6<Scalar> vec() const {
    Vec6<Scalar> z;
    z << u, v, r, x, y, psi;
    return z;
  }
  static VesselStateT from_vec(const Vec6<Scalar>& z) {
    return {z[0], z[1], z[2], z[3], z[4], z[5]};
  }
  Vec2<Scalar> position() const { return Vec2<Scalar>(x, y); }
  bool finite() const {
    return std::isfinite(u) && std::isfinite(v) && std::isfinite(r) &&
           std::isfinite(x) && std::isfinite(y) && std::isfinite(psi);
  }
};

using VesselState = VesselStateT<double>;

template <typename Scalar>
struct ThrustCmdT {
  Scalar T1{0}, T2{0};  // [N]
  bool finite() const { return std::isfinite(T1) && std::isfinite(T2); }
};

using ThrustCmd = ThrustCmdT<double>;

template <typename Scalar>
struct BodyWrenchT {
  Scalar Fu{0}, Fv{0}, Mr{0};  // surge force [N], sway force [N], yaw moment [N m]
  bool finite() const { return std::isfinite(Fu) && std::isfinite(Fv) && std::isfinite(Mr); }
};

using BodyWrench = BodyWrenchT<double>;

/// Body-to-inertial rotation about yaw.
template <typename Scalar>
Mat3<Scalar> rotation_matrix(Scalar psi) {
  const Scalar c = std::cos(psi), s = std::sin(psi);
  Mat3<Scalar> R;
  R << c, -s, Scalar{0},
       s, c, Scalar{0},
       Scalar{0}, Scalar{0}, Scalar{1};
  return R;
}

/// Motion-equation right-hand side, (du, dv, dr, dx, dy, dpsi).
template <typename Scalar>
Vec6<Scalar> continuous_derivative(const VesselStateT<Scalar>& s, const ThrustCmdT<Scalar>& cmd,
                                   const BodyWrenchT<Scalar>& tau_d, const VesselParamsT<Scalar>& p) {
  if (!s.finite() || !cmd.finite() || !tau_d.finite())
    throw std::invalid_argument("continuous_derivative: non-finite input");
  Vec6<Scalar> dz;
  dz[0] = (cmd.T1 + cmd.T2 + p.m22 * s.v * s.r - p.Xu * s.u + tau_d.Fu) / p.m11;
  dz[1] = (-p.m11 * s.u * s.r - p.Yv * s.v + tau_d.Fv) / p.m22;
  dz[2] = ((cmd.T1 - cmd.T2) * p.l - (p.m22 - p.m11) * s.u * s.v - p.Nr * s.r + tau_d.Mr) / p.m33;
  const Scalar c = std::cos(s.psi), sn = std::sin(s.psi);
  dz[3] = c * s.u - sn * s.v;
  dz[4] = sn * s.u + c * s.v;
  dz[5] = s.r;
  return dz;
}

/// One fixed-step RK4 update; thrust and disturbance held over the step.
template <typename Scalar>
VesselStateT<Scalar> step_discrete(const VesselStateT<Scalar>& s, const ThrustCmdT<Scalar>& cmd,
                                   const BodyWrenchT<Scalar>& tau_d, Scalar dt,
                                   const VesselParamsT<Scalar>& p) {
  if (!(dt > 0) || !std::isfinite(dt))
    throw std::invalid_argument("step_discrete: dt must be positive and finite");
  using State = VesselStateT<Scalar>;
  const Vec6<Scalar> z = s.vec();
  const Vec6<Scalar> k1 = continuous_derivative(s, cmd, tau_d, p);
  const Vec6<Scalar> k2 =
      continuous_derivative(State::from_vec(z + (dt / 2) * k1), cmd, tau_d, p);
  const Vec6<Scalar> k3 =
      continuous_derivative(State::from_vec(z + (dt / 2) * k2), cmd, tau_d, p);
  const Vec6<Scalar> k4 = continuous_derivative(State::from_vec(z + dt * k3), cmd, tau_d, p);
  return State::from_vec(z + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4));
}

/// Electrical power drawn by a single thruster at thrust T.
template <typename Scalar>
Scalar thruster_power(Scalar T, Scalar alpha) {
  return alpha * T * T;
}

/// Instantaneous vehicle power: both thrusters plus the task load.
template <typename Scalar>
Scalar stage_power(const ThrustCmdT<Scalar>& cmd, const VesselParamsT<Scalar>& p) {
  return thruster_power(cmd.T1, p.alpha) + thruster_power(cmd.T2, p.alpha) + p.T_w;
}

template <typename Scalar>
ThrustCmdT<Scalar> clamp_thrust(const ThrustCmdT<Scalar>& cmd, const VesselParamsT<Scalar>& p) {
  return {std::clamp(cmd.T1, -p.T_max, p.T_max), std::clamp(cmd.T2, -p.T_max, p.T_max)};
}

/// Drivetrain quantization used when emulating the physical vehicle:
/// commands inside the dead zone produce no thrust.
template <typename Scalar>
ThrustCmdT<Scalar> apply_dead_zone(const ThrustCmdT<Scalar>& cmd, const VesselParamsT<Scalar>& p) {
  auto q = [&](Scalar t) { return std::abs(t) < p.T_min ? Scalar{0} : t; };
  return {q(cmd.T1), q(cmd.T2)};
}

}  // namespace asvempc
