#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "riskplan/mdp.hpp"

namespace riskplan {

/// Axis-aligned box obstacle.
struct Obstacle {
  std::string label;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();
  /// Displaced at random by the simulator.
  bool perturbable = false;
};

struct Waypoint {
  std::string id;
  std::string label;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  bool critical = false;
  std::optional<std::string> inspection_target;
};

struct Edge {
  std::string from;
  std::string to;
  double collision_probability = 0.0;
};

struct SpeedLimits {
  double v_max = 1.0;
  double v_crit = 0.25;
  double critical_radius = 2.0;
};

struct Mission {
  std::string start;
  std::string final;
  std::vector<std::string> inspect;
};

struct Scenario {
  std::vector<Obstacle> obstacles;
  std::vector<Waypoint> waypoints;
  std::vector<Edge> edges;
  Mission mission;
  SpeedLimits limits;

  std::optional<std::size_t> waypoint_index(std::string_view id) const;
  std::optional<std::size_t> obstacle_index(std::string_view label) const;
  /// Edges are undirected.
  const Edge* find_edge(std::string_view a, std::string_view b) const;
};

struct Diagnostic {
  /// One of SyntaxError, UnknownReference, DuplicateId, InvalidValue.
  std::string kind;
  std::size_t line = 0;
  std::size_t column = 0;
  std::string message;
};

struct ParseResult {
  std::optional<Scenario> scenario;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return scenario.has_value(); }
};

/// Parses the line-oriented scenario grammar:
///
///   # comment
///   LIMITS   v_max=<m/s> v_crit=<m/s> critical_radius=<m>
///   OBSTACLE <label> center=<x>,<y>,<z> half=<hx>,<hy>,<hz> [perturb]
///   WAYPOINT <id> pos=<x>,<y>,<z> [label="<text>"] [critical] [inspect=<obstacle>]
///   EDGE     <id> <id> [p=<collision probability>]
///   MISSION  start=<id> final=<id> [inspect=<obstacle>,...]
///
/// Never throws; any problem becomes a positioned diagnostic and the
/// scenario is withheld.
ParseResult parse_scenario(std::string_view text);

/// Semantic checks shared by the parser and by generated scenarios.
std::vector<Diagnostic> check_scenario(const Scenario& s);

std::string write_scenario(const Scenario& s);

enum class CollisionModel {
  /// Collision ends the mission in an absorbing failure state.
  Absorbing,
  /// Collision costs `restart_cost` and sends the vehicle back to the start
  /// with no inspections recorded.
  Restart,
};

struct GroundingOptions {
  CollisionModel collision = CollisionModel::Restart;
  double restart_cost = 10.0;
};

struct GroundedAction {
  enum class Kind { Move, Inspect, Recover };
  Kind kind = Kind::Move;
  /// Destination waypoint for Move.
  std::size_t waypoint = 0;
  /// Index into GroundedProblem::targets for Inspect.
  std::size_t target = 0;
};

/// States are (waypoint, inspection bitmask) pairs plus one "collided"
/// state, which has the highest id.
struct GroundedProblem {
  Mdp mdp;
  std::vector<GroundedAction> actions;
  std::vector<std::string> targets;
  std::size_t num_waypoints = 0;
  StateId collided = 0;

  StateId encode(std::size_t waypoint, std::uint64_t mask) const {
    return waypoint * (std::uint64_t{1} << targets.size()) + mask;
  }
  std::size_t waypoint_of(StateId s) const { return s >> targets.size(); }
  std::uint64_t mask_of(StateId s) const { return s & ((std::uint64_t{1} << targets.size()) - 1); }
};

inline constexpr std::size_t kMaxInspectionTargets = 16;

GroundedProblem ground_to_mdp(const Scenario& s, const GroundingOptions& opts = {});

/// A high-level plan step in waypoint terms.
struct PlanStep {
  enum class Kind { Move, Inspect };
  Kind kind = Kind::Move;
  std::string waypoint;
  std::string target;
};

/// Translates grounded action labels ("goto <id>", "inspect <label>") back
/// into plan steps. Unknown labels raise InvalidArgument.
std::vector<PlanStep> steps_from_actions(const std::vector<std::string>& actions);

}  // namespace riskplan
