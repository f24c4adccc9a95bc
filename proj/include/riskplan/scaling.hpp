#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskplan/risk_planner.hpp"
#include "riskplan/scenario.hpp"

namespace riskplan {

struct CorridorOptions {
  double spacing = 5.0;
  /// Collision probability of the riskiest shortcut; the others are spread
  /// down to a fifth of it.
  double shortcut_probability = 0.02;
};

/// Linear chain c0..c<depth> of safe edges with one risky shortcut per
/// critical state: a critical bypass waypoint next to an obstacle that joins
/// c<a> to c<a+3>, saving one step. Requires depth >= 3.
Scenario corridor_scenario(std::size_t depth, std::size_t criticals, const CorridorOptions& opts = {});

struct ScalingOptions {
  CandidateOptions candidates;
  GroundingOptions grounding;
  CorridorOptions corridor;
  /// Planning time is the median over this many candidate generations,
  /// after one untimed warm-up run.
  std::size_t repeats = 15;
  /// Sampled histories per candidate for MDP-level selection.
  std::size_t histories = 1000;
  double alpha_mean = 0.05;
};

struct ScalingRow {
  std::size_t depth = 0;
  std::size_t criticals = 0;
  std::size_t waypoints = 0;
  std::size_t states = 0;
  bool solved = false;
  std::size_t candidates = 0;
  std::string plan_id;
  std::size_t plan_length = 0;
  double gamma = 0.0;
  double planning_time_s = 0.0;
  std::string error;
};

/// Solves one corridor per (depth, criticals) case and selects the safest
/// candidate from sampled history costs. A failing case is recorded in its
/// row; the call throws only when the case list is empty.
std::vector<ScalingRow> run_scaling(const std::vector<std::pair<std::size_t, std::size_t>>& cases,
                                    const ScalingOptions& opts, std::uint64_t master_seed);

nlohmann::json to_json(const ScalingRow& r);
/// "depth,criticals,waypoints,states,solved,candidates,plan,plan length,gamma,planning time [s]".
std::string scaling_csv(const std::vector<ScalingRow>& rows);

}  // namespace riskplan
