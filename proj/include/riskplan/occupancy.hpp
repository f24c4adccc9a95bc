#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "riskplan/scenario.hpp"

namespace riskplan {

using VoxelIndex = std::array<int, 3>;

/// Dense log-odds voxel grid. Cell (0,0,0) spans [origin, origin + resolution).
class VoxelGrid {
 public:
  static constexpr double kLogOddsMin = -3.5;
  static constexpr double kLogOddsMax = 3.5;

  VoxelGrid(Eigen::Vector3d origin, double resolution, VoxelIndex dims);

  /// Smallest grid at `resolution` covering the box [lo, hi].
  static VoxelGrid covering(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, double resolution);

  const Eigen::Vector3d& origin() const { return origin_; }
  double resolution() const { return resolution_; }
  const VoxelIndex& dims() const { return dims_; }
  std::size_t size() const { return cells_.size(); }
  Eigen::Vector3d upper() const;

  bool contains(const VoxelIndex& v) const;
  std::optional<VoxelIndex> voxel_of(const Eigen::Vector3d& p) const;
  Eigen::Vector3d center(const VoxelIndex& v) const;

  double log_odds(const VoxelIndex& v) const { return cells_[flat(v)]; }
  double occupancy(const VoxelIndex& v) const;
  /// Adds `delta` and clamps to [kLogOddsMin, kLogOddsMax].
  void update(const VoxelIndex& v, double delta);

  template <typename F>
  void for_each(F&& f) const {
    for (int z = 0; z < dims_[2]; ++z)
      for (int y = 0; y < dims_[1]; ++y)
        for (int x = 0; x < dims_[0]; ++x) f(VoxelIndex{x, y, z}, cells_[flat({x, y, z})]);
  }

 private:
  std::size_t flat(const VoxelIndex& v) const {
    return (static_cast<std::size_t>(v[2]) * dims_[1] + v[1]) * dims_[0] + v[0];
  }

  Eigen::Vector3d origin_;
  double resolution_;
  VoxelIndex dims_;
  std::vector<double> cells_;
};

double logistic(double log_odds);
double log_odds_of(double probability);

struct Beam {
  /// Unit direction in the sensor frame.
  Eigen::Vector3d direction = Eigen::Vector3d::UnitX();
  double range = 0.0;
  double max_range = 0.0;
};

struct SonarScan {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  std::vector<Beam> beams;
};

struct SensorModel {
  double p_hit = 0.7;
  double p_miss = 0.4;
};

/// Voxels crossed by the segment [from, to] in traversal order, each once.
/// The segment is clipped to the grid first.
std::vector<VoxelIndex> traverse(const VoxelGrid& g, const Eigen::Vector3d& from, const Eigen::Vector3d& to);

/// Applies one scan: misses along each beam, a hit at the return voxel when
/// the range is below the beam's maximum. Beams leaving the grid are cut at
/// its boundary.
void integrate_scan(VoxelGrid& g, const SonarScan& scan, const SensorModel& model = {});

struct BeamFan {
  std::vector<Eigen::Vector3d> directions;
  double max_range = 10.0;

  /// Horizontal fan of `count` beams spread evenly over `aperture` radians,
  /// centred on the sensor x axis.
  static BeamFan horizontal(std::size_t count, double aperture, double max_range);
};

/// Distance along the ray to the box, if hit at t >= 0.
std::optional<double> ray_box(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, const Obstacle& box);

std::vector<SonarScan> synthesize_scans(const std::vector<Obstacle>& obstacles,
                                        const std::vector<Eigen::Isometry3d>& sensor_path,
                                        const BeamFan& fan, std::mt19937_64& rng, double range_sigma);

struct ExtractionOptions {
  double tau_occ = 0.5;
  double clearance = 1.0;
  double kappa = 0.3;
  double max_probability = 0.95;
};

struct ExtractedProblem {
  std::vector<bool> critical;
  std::vector<double> edge_probability;
};

/// Critical flags per waypoint and collision probabilities per edge, in the
/// order of the scenario's waypoints and edges.
ExtractedProblem extract_problem(const VoxelGrid& g, const Scenario& s, const ExtractionOptions& opts = {});

/// Copies flags and probabilities into a scenario.
Scenario apply_extraction(Scenario s, const ExtractedProblem& p);

/// "ix,iy,iz,occupancy" rows for voxels with |log-odds| > 0.01.
std::string grid_to_csv(const VoxelGrid& g);

/// Closest distance from `p` to an axis-aligned box (0 inside).
double distance_to_box(const Eigen::Vector3d& p, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi);

}  // namespace riskplan
