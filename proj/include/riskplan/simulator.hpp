#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "riskplan/plan_io.hpp"
#include "riskplan/scenario.hpp"
#include "riskplan/trajectory.hpp"

namespace riskplan {

struct SeedTuple {
  std::uint64_t master = 0;
  std::string plan_id;
  std::uint64_t episode = 0;

  bool operator==(const SeedTuple&) const = default;
};

/// Stable 64-bit seed for a named stream; identical on every platform.
std::uint64_t derive_seed(const SeedTuple& seed);
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage);

struct Incident {
  double time = 0.0;
  std::string obstacle;
  double min_distance = 0.0;

  bool operator==(const Incident&) const = default;
};

struct EpisodeRecord {
  std::string plan_id;
  std::uint64_t episode = 0;
  double execution_time = 0.0;
  std::vector<Incident> incidents;
  bool completed = false;
  SeedTuple seed;

  bool operator==(const EpisodeRecord&) const = default;
};

struct DisturbanceConfig {
  /// Per-axis standard deviation of the current drift velocity, m/s.
  double current_sigma = 0.05;
  /// Per-axis standard deviation of the one-off obstacle displacement, m.
  double obstacle_sigma = 0.5;
  double capture_radius = 0.2;
  double clearance = 0.5;
  double recovery_penalty = 30.0;
  /// Lag-one autocorrelation of the drift; 0 gives i.i.d. steps.
  double drift_correlation = 0.0;
  /// Displace every obstacle instead of only those marked perturbable.
  bool perturb_all = false;
  /// End the episode, uncompleted, at the first incident.
  bool abort_on_incident = false;
  /// Slowest speed used when chasing a sample, m/s.
  double min_chase_speed = 0.05;
  double dt = 0.1;
  /// Fixed displacement added to the named obstacles on top of the noise.
  std::map<std::string, Eigen::Vector3d> forced_offsets;
};

/// Kinematic point robot tracking the trajectory under Gaussian current
/// drift, with obstacles displaced once per episode. Incidents are logged
/// each time the robot enters an obstacle's clearance zone; each adds the
/// recovery penalty to the clock. Episodes running past ten times the
/// nominal duration stop uncompleted.
EpisodeRecord run_episode(const Trajectory& traj, const Scenario& s, const DisturbanceConfig& cfg,
                          const SeedTuple& seed);

/// Episodes 0..n-1 of one plan, ordered by episode index. `threads` caps the
/// worker count (0 picks the hardware concurrency).
std::vector<EpisodeRecord> run_batch(const Trajectory& traj, const Scenario& s, const DisturbanceConfig& cfg,
                                     std::size_t n, std::uint64_t master_seed, unsigned threads = 0);

nlohmann::json to_json(const EpisodeRecord& r);
EpisodeRecord episode_from_json(const nlohmann::json& j);

/// One record per line. With a provenance the first line is a header
/// object {"format_version", "provenance"}, which the reader skips.
std::string episodes_to_jsonl(const std::vector<EpisodeRecord>& records,
                              const std::optional<Provenance>& provenance = std::nullopt);
std::vector<EpisodeRecord> episodes_from_jsonl(const std::string& text);

nlohmann::json to_json(const DisturbanceConfig& c);
DisturbanceConfig disturbance_from_json(const nlohmann::json& j, const std::string& path);

}  // namespace riskplan
