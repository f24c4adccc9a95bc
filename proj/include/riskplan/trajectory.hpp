#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "riskplan/scenario.hpp"

namespace riskplan {

struct TrajectorySample {
  double time = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  /// Average speed over the interval ending at this sample; the first
  /// sample repeats the second's.
  double speed = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  double length = 0.0;
  double duration = 0.0;
  std::string plan_id;
};

struct RefineOptions {
  double dt = 0.1;
  double a_max = 0.5;
  std::size_t helix_points = 50;
  /// Stand-off added to the obstacle's horizontal half-extent.
  double helix_clearance = 1.0;
  double helix_turns = 1.0;
  /// Arc-length resolution of the speed profile.
  double arc_step = 0.005;
};

/// Piecewise-linear trajectory through the plan's waypoints. Each move and
/// each inspection loop is one rest-to-rest trapezoidal profile; speed is
/// capped at v_crit near critical waypoints. Samples fall on a dt grid plus
/// every polyline vertex.
Trajectory refine(const Scenario& s, const std::vector<PlanStep>& steps, const RefineOptions& opts = {},
                  std::string plan_id = {});

/// Polyline vertices of an inspection loop around `o`, starting near `from`.
std::vector<Eigen::Vector3d> helix_around(const Obstacle& o, const Eigen::Vector3d& from, const RefineOptions& opts);

/// Sum of distances between consecutive samples.
double low_level_length(const Trajectory& t);

std::string trajectory_to_csv(const Trajectory& t);

}  // namespace riskplan
