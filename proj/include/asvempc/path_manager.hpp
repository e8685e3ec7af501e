#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace asvempc {

struct Waypoint {
  double x{0}, y{0};
  Eigen::Vector2d vec() const { return {x, y}; }
};

// Waypoint mission with circle-of-acceptance (COA) switching. The segment
// used for cross-track bookkeeping runs from the previously passed waypoint
// (or the start position, before the first waypoint is reached) to the
// active one.
struct PathState {
  std::vector<Waypoint> waypoints;
  int active{0};          // index of the current target
  double r_coa{1.0};      // acceptance radius [m]
  Waypoint start_anchor;  // segment anchor before the first waypoint is reached
};

inline PathState make_path(std::vector<Waypoint> waypoints, double r_coa,
                           const Eigen::Vector2d& start) {
  if (waypoints.empty()) throw std::invalid_argument("path: at least one waypoint required");
  if (!(r_coa > 0)) throw std::invalid_argument("path: acceptance radius must be positive");
  if (!std::isfinite(start.x()) || !std::isfinite(start.y()))
    throw std::invalid_argument("path: non-finite start position");
  for (size_t i = 0; i < waypoints.size(); ++i) {
    if (!std::isfinite(waypoints[i].x) || !std::isfinite(waypoints[i].y))
      throw std::invalid_argument("path: non-finite waypoint");
    if (i > 0 && (waypoints[i].vec() - waypoints[i - 1].vec()).norm() == 0.0)
      throw std::invalid_argument("path: consecutive waypoints must be distinct");
  }
  PathState p;
  p.waypoints = std::move(waypoints);
  p.r_coa = r_coa;
  p.start_anchor = {start.x(), start.y()};
  return p;
}

inline int waypoint_count(const PathState& p) { return static_cast<int>(p.waypoints.size()); }

inline bool mission_complete(const PathState& p, const Eigen::Vector2d& position) {
  const int n = waypoint_count(p);
  if (p.active >= n) return true;
  return p.active == n - 1 && (p.waypoints.back().vec() - position).norm() <= p.r_coa;
}

/// Advance the active waypoint by at most one when its COA is entered.
inline PathState update_active(PathState p, const Eigen::Vector2d& position) {
  if (p.active < waypoint_count(p) &&
      (p.waypoints[p.active].vec() - position).norm() <= p.r_coa)
    ++p.active;
  return p;
}

inline Waypoint active_target(const PathState& p) {
  if (p.active >= waypoint_count(p)) throw std::logic_error("path: mission already complete");
  return p.waypoints[p.active];
}

inline Waypoint previous_anchor(const PathState& p) {
  const int idx = std::min(p.active, waypoint_count(p) - 1);
  return idx == 0 ? p.start_anchor : p.waypoints[idx - 1];
}

/// Distance to the nearer of the active waypoint and the previous anchor.
inline double nearest_waypoint_distance(const PathState& p, const Eigen::Vector2d& position) {
  const int idx = std::min(p.active, waypoint_count(p) - 1);
  return std::min((p.waypoints[idx].vec() - position).norm(),
                  (previous_anchor(p).vec() - position).norm());
}

/// Perpendicular distance to the line through the current segment, gated to
/// zero when the vehicle is near either segment endpoint.
inline double cross_track_error(const PathState& p, const Eigen::Vector2d& position) {
  if (nearest_waypoint_distance(p, position) <= p.r_coa) return 0.0;
  const int idx = std::min(p.active, waypoint_count(p) - 1);
  const Eigen::Vector2d a = previous_anchor(p).vec();
  const Eigen::Vector2d b = p.waypoints[idx].vec();
  const Eigen::Vector2d ab = b - a;
  const double len = ab.norm();
  if (len < 1e-12)
    throw std::domain_error("cross-track: degenerate segment (coincident endpoints)");
  const Eigen::Vector2d ap = position - a;
  return std::abs(ab.x() * ap.y() - ab.y() * ap.x()) / len;
}

/// True when the position lies inside the COA of any waypoint or of the
/// start anchor. Such samples do not contribute to the average-error metric.
inline bool inside_any_coa(const PathState& p, const Eigen::Vector2d& position) {
  if ((p.start_anchor.vec() - position).norm() <= p.r_coa) return true;
  for (const auto& w : p.waypoints)
    if ((w.vec() - position).norm() <= p.r_coa) return true;
  return false;
}

}  // namespace asvempc
