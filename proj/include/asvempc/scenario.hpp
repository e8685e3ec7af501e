#pragma once

#include "asvempc/controllers.hpp"
#include "asvempc/disturbance_field.hpp"
#include "asvempc/path_manager.hpp"
#include "asvempc/vessel_model.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace asvempc {

// A scenario bundles everything one closed-loop run needs: vehicle, course,
// start state, environment, the controllers to exercise, and loop settings.

struct SimConfig {
  double dt{0.1};            // plant/control period [s]
  double max_sim_time{900};  // wall-clock cap on simulated time [s]
  double r_coa{1.0};         // waypoint acceptance radius [m]
  int plant_substeps{1};     // integrator substeps per control period
  bool apply_dead_zone{false};
  std::string out_dir;       // default output directory, may be empty
};

struct ControllerSpec {
  std::string name;  // used for output file prefixes, must be unique
  ControllerConfig config;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Scenario {
  VesselParams vessel = sim_params();
  std::vector<Waypoint> waypoints;
  VesselState initial_state;
  DisturbanceSpec disturbance = no_disturbance();
  std::vector<ControllerSpec> controllers;
  SimConfig sim;
  std::string grid_csv;  // grid used when comparing under the spatial condition

  void validate() const;  // throws ScenarioError
};

/// Load and validate a scenario JSON file. Unknown keys anywhere in the
/// document are rejected. Relative grid paths resolve against the file's
/// directory. Throws ScenarioError.
Scenario load_scenario(const std::string& path);

/// Five-leg rectangular course exercised by all three controllers.
Scenario default_scenario();

/// Two collinear waypoints; the energy-aware pair only.
Scenario straight_leg_scenario();

/// Single waypoint, one controller; small enough to compare against the
/// offline collocation oracle.
Scenario single_leg_oracle_scenario();

/// Smooth synthetic force field covering the default course.
GridField make_demo_grid();

/// Disturbance presets for the comparison table, numbered 1..5:
/// 1 none, 2 constant body, 3/4 constant inertial, 5 spatial grid.
/// For condition 5 a grid CSV path may be supplied; empty means the built-in
/// demo grid.
DisturbanceSpec condition_disturbance(int condition, const std::string& grid_path = "");
DisturbanceSpec condition_disturbance(int condition, std::shared_ptr<const GridField> grid);

inline constexpr int kNumConditions = 5;

}  // namespace asvempc
