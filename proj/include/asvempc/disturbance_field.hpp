#pragma once

#include "asvempc/vessel_model.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>

namespace asvempc {

// Environmental force field acting on the hull. Constant fields are given in
// either the body or the inertial frame; spatially varying fields come from a
// grid file and are bilinearly interpolated. No condition applies a yaw
// moment.

struct GridField {
  Eigen::VectorXd xs, ys;        // strictly increasing knots [m]
  Eigen::MatrixXd taux, tauy;    // force components [N], (i,j) at (xs[i], ys[j])
};

enum class DisturbanceKind { none, constant_body, constant_inertial, grid };

struct DisturbanceSpec {
  DisturbanceKind kind{DisturbanceKind::none};
  double a{0}, b{0};  // (tau_u, tau_v) for body kinds, (tau_x, tau_y) for inertial
  std::shared_ptr<const GridField> grid;  // required for grid kind
  std::string grid_path;                  // provenance for error messages / serialization
};

inline DisturbanceSpec no_disturbance() { return {}; }

inline DisturbanceSpec constant_body_disturbance(double tau_u, double tau_v) {
  DisturbanceSpec s;
  s.kind = DisturbanceKind::constant_body;
  s.a = tau_u;
  s.b = tau_v;
  return s;
}

inline DisturbanceSpec constant_inertial_disturbance(double tau_x, double tau_y) {
  DisturbanceSpec s;
  s.kind = DisturbanceKind::constant_inertial;
  s.a = tau_x;
  s.b = tau_y;
  return s;
}

DisturbanceSpec grid_disturbance(std::shared_ptr<const GridField> grid, std::string path = "");

/// Parse a grid CSV (header x,y,taux,tauy; row-major, x outer). Throws
/// std::runtime_error with file and line context on malformed input,
/// non-monotone axis knots, or dimension mismatch.
GridField load_grid(const std::string& path);

/// Write a grid in the same CSV format, 17 significant digits.
void write_grid_csv(const GridField& field, const std::string& path);

/// Bilinear interpolation of (taux, tauy) at an inertial position; queries
/// outside the knot bounding box clamp to the boundary.
Eigen::Vector2d sample_grid(const GridField& field, double x, double y);

/// Disturbance wrench in the body frame at the given pose. Inertial vectors
/// are rotated through R(psi)^T; the yaw moment is always zero.
BodyWrench sample(const DisturbanceSpec& spec, const Eigen::Vector2d& position, double psi);

}  // namespace asvempc
