#include "riskplan/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "riskplan/errors.hpp"

namespace riskplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Parametric range [t0, t1] of the segment p(t) = a + t*(b - a), t in [0,1],
// that lies inside the box, if any.
std::optional<std::pair<double, double>> clip_segment(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                                                      const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  double t0 = 0.0, t1 = 1.0;
  const Eigen::Vector3d d = b - a;
  for (int i = 0; i < 3; ++i) {
    if (d[i] == 0.0) {
      if (a[i] < lo[i] || a[i] > hi[i]) return std::nullopt;
      continue;
    }
    double ta = (lo[i] - a[i]) / d[i];
    double tb = (hi[i] - a[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

// Minimum of a convex function on [0,1] by golden-section search.
template <typename F>
double convex_min(F&& f) {
  constexpr double kPhi = 0.6180339887498949;
  double lo = 0.0, hi = 1.0;
  double x1 = hi - kPhi * (hi - lo), x2 = lo + kPhi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < 60; ++i) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kPhi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kPhi * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min({f(0.0), f(1.0), f1, f2});
}

}  // namespace

double logistic(double log_odds) { return 1.0 / (1.0 + std::exp(-log_odds)); }

double log_odds_of(double probability) { return std::log(probability / (1.0 - probability)); }

double distance_to_box(const Eigen::Vector3d& p, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  const Eigen::Vector3d clamped = p.cwiseMax(lo).cwiseMin(hi);
  return (p - clamped).norm();
}

VoxelGrid::VoxelGrid(Eigen::Vector3d origin, double resolution, VoxelIndex dims)
    : origin_(std::move(origin)), resolution_(resolution), dims_(dims) {
  if (!(resolution > 0.0)) throw InvalidArgument("voxel resolution must be positive");
  if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) throw InvalidArgument("voxel grid dimensions must be positive");
  cells_.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0.0);
}

VoxelGrid VoxelGrid::covering(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, double resolution) {
  VoxelIndex dims{};
  for (int i = 0; i < 3; ++i) dims[i] = std::max(1, static_cast<int>(std::ceil((hi[i] - lo[i]) / resolution)));
  return VoxelGrid(lo, resolution, dims);
}

Eigen::Vector3d VoxelGrid::upper() const {
  return origin_ + resolution_ * Eigen::Vector3d(dims_[0], dims_[1], dims_[2]);
}

bool VoxelGrid::contains(const VoxelIndex& v) const {
  for (int i = 0; i < 3; ++i)
    if (v[i] < 0 || v[i] >= dims_[i]) return false;
  return true;
}

std::optional<VoxelIndex> VoxelGrid::voxel_of(const Eigen::Vector3d& p) const {
  VoxelIndex v{};
  for (int i = 0; i < 3; ++i) {
    const double rel = (p[i] - origin_[i]) / resolution_;
    if (!(rel >= 0.0) || rel > dims_[i]) return std::nullopt;
    // Points on the far face belong to the last voxel.
    v[i] = std::min(static_cast<int>(std::floor(rel)), dims_[i] - 1);
  }
  return v;
}

Eigen::Vector3d VoxelGrid::center(const VoxelIndex& v) const {
  return origin_ + resolution_ * (Eigen::Vector3d(v[0], v[1], v[2]) + Eigen::Vector3d::Constant(0.5));
}

double VoxelGrid::occupancy(const VoxelIndex& v) const { return logistic(log_odds(v)); }

void VoxelGrid::update(const VoxelIndex& v, double delta) {
  auto& cell = cells_[flat(v)];
  cell = std::clamp(cell + delta, kLogOddsMin, kLogOddsMax);
}

std::vector<VoxelIndex> traverse(const VoxelGrid& g, const Eigen::Vector3d& from, const Eigen::Vector3d& to) {
  std::vector<VoxelIndex> out;
  const auto clip = clip_segment(from, to, g.origin(), g.upper());
  if (!clip) return out;
  const Eigen::Vector3d d = to - from;
  const Eigen::Vector3d a = from + clip->first * d;
  const Eigen::Vector3d b = from + clip->second * d;

  auto cell = [&](const Eigen::Vector3d& p) {
    VoxelIndex v{};
    for (int i = 0; i < 3; ++i)
      v[i] = std::clamp(static_cast<int>(std::floor((p[i] - g.origin()[i]) / g.resolution())), 0, g.dims()[i] - 1);
    return v;
  };
  VoxelIndex cur = cell(a);
  const VoxelIndex last = cell(b);

  const Eigen::Vector3d seg = b - a;
  const double len = seg.norm();
  int step[3];
  double t_max[3], t_delta[3];
  for (int i = 0; i < 3; ++i) {
    if (seg[i] > 0.0) {
      step[i] = 1;
      const double boundary = g.origin()[i] + (cur[i] + 1) * g.resolution();
      t_max[i] = (boundary - a[i]) / seg[i];
      t_delta[i] = g.resolution() / seg[i];
    } else if (seg[i] < 0.0) {
      step[i] = -1;
      const double boundary = g.origin()[i] + cur[i] * g.resolution();
      t_max[i] = (boundary - a[i]) / seg[i];
      t_delta[i] = -g.resolution() / seg[i];
    } else {
      step[i] = 0;
      t_max[i] = kInf;
      t_delta[i] = kInf;
    }
  }

  out.push_back(cur);
  if (len == 0.0) return out;
  const std::size_t cap = static_cast<std::size_t>(g.dims()[0] + g.dims()[1] + g.dims()[2]) + 3;
  while (cur != last && out.size() < cap) {
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    if (t_max[axis] > 1.0) break;
    cur[axis] += step[axis];
    t_max[axis] += t_delta[axis];
    if (!g.contains(cur)) break;
    out.push_back(cur);
  }
  return out;
}

void integrate_scan(VoxelGrid& g, const SonarScan& scan, const SensorModel& model) {
  if (!(model.p_hit > 0.5 && model.p_hit < 1.0 && model.p_miss > 0.0 && model.p_miss < 0.5))
    throw InvalidArgument("sensor model needs 0 < p_miss < 0.5 < p_hit < 1");
  const double hit = log_odds_of(model.p_hit);
  // A symmetric model mirrors the hit increment so hit + miss cancels exactly.
  const double miss = model.p_hit + model.p_miss == 1.0 ? -hit : log_odds_of(model.p_miss);
  for (const auto& beam : scan.beams) {
    if (std::abs(beam.direction.norm() - 1.0) > 1e-9) throw InvalidArgument("beam direction is not unit length");
    if (!(beam.range > 0.0 && beam.range <= beam.max_range))
      throw InvalidArgument(fmt::format("beam range {} outside (0, {}]", beam.range, beam.max_range));

    const Eigen::Vector3d dir = scan.orientation * beam.direction;
    const Eigen::Vector3d end = scan.position + beam.range * dir;
    auto voxels = traverse(g, scan.position, end);
    const auto end_voxel = g.voxel_of(end);
    const bool returns = beam.range < beam.max_range && end_voxel && !voxels.empty() && voxels.back() == *end_voxel;
    const std::size_t misses = returns ? voxels.size() - 1 : voxels.size();
    for (std::size_t i = 0; i < misses; ++i) g.update(voxels[i], miss);
    if (returns) g.update(voxels.back(), hit);
  }
}

BeamFan BeamFan::horizontal(std::size_t count, double aperture, double max_range) {
  BeamFan fan;
  fan.max_range = max_range;
  for (std::size_t i = 0; i < count; ++i) {
    const double yaw = count == 1 ? 0.0 : -aperture / 2 + aperture * static_cast<double>(i) / (count - 1);
    fan.directions.emplace_back(std::cos(yaw), std::sin(yaw), 0.0);
  }
  return fan;
}

std::optional<double> ray_box(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, const Obstacle& box) {
  const Eigen::Vector3d lo = box.center - box.half_extents;
  const Eigen::Vector3d hi = box.center + box.half_extents;
  double t0 = 0.0, t1 = kInf;
  for (int i = 0; i < 3; ++i) {
    if (dir[i] == 0.0) {
      if (origin[i] < lo[i] || origin[i] > hi[i]) return std::nullopt;
      continue;
    }
    double ta = (lo[i] - origin[i]) / dir[i];
    double tb = (hi[i] - origin[i]) / dir[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

std::vector<SonarScan> synthesize_scans(const std::vector<Obstacle>& obstacles,
                                        const std::vector<Eigen::Isometry3d>& sensor_path, const BeamFan& fan,
                                        std::mt19937_64& rng, double range_sigma) {
  if (!(range_sigma >= 0.0)) throw InvalidArgument("range noise sigma must be non-negative");
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<SonarScan> scans;
  for (const auto& pose : sensor_path) {
    SonarScan scan;
    scan.position = pose.translation();
    scan.orientation = Eigen::Quaterniond(pose.rotation());
    for (const auto& d : fan.directions) {
      const Eigen::Vector3d local = d.normalized();
      const Eigen::Vector3d world = scan.orientation * local;
      double nearest = kInf;
      for (const auto& o : obstacles)
        if (auto t = ray_box(scan.position, world, o)) nearest = std::min(nearest, *t);
      double range = fan.max_range;
      if (nearest <= fan.max_range) {
        const double jitter = range_sigma > 0.0 ? range_sigma * noise(rng) : 0.0;
        range = std::clamp(nearest + jitter, 1e-6, fan.max_range);
      }
      scan.beams.push_back({local, range, fan.max_range});
    }
    scans.push_back(std::move(scan));
  }
  return scans;
}

ExtractedProblem extract_problem(const VoxelGrid& g, const Scenario& s, const ExtractionOptions& opts) {
  if (!(opts.clearance >= 0.0 && opts.kappa >= 0.0 && opts.tau_occ > 0.0 && opts.tau_occ < 1.0))
    throw InvalidArgument("extraction needs tau_occ in (0,1) and non-negative clearance and kappa");

  const double res = g.resolution();
  auto voxel_box = [&](const VoxelIndex& v) {
    const Eigen::Vector3d lo = g.origin() + res * Eigen::Vector3d(v[0], v[1], v[2]);
    return std::make_pair(lo, Eigen::Vector3d(lo + Eigen::Vector3d::Constant(res)));
  };
  // Occupied voxels whose box comes within `clearance` of the region [lo, hi].
  auto occupied_near = [&](const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, auto&& visit) {
    VoxelIndex a{}, b{};
    for (int i = 0; i < 3; ++i) {
      a[i] = std::max(0, static_cast<int>(std::floor((lo[i] - opts.clearance - g.origin()[i]) / res)));
      b[i] = std::min(g.dims()[i] - 1, static_cast<int>(std::floor((hi[i] + opts.clearance - g.origin()[i]) / res)));
    }
    for (int z = a[2]; z <= b[2]; ++z)
      for (int y = a[1]; y <= b[1]; ++y)
        for (int x = a[0]; x <= b[0]; ++x) {
          const VoxelIndex v{x, y, z};
          const double occ = g.occupancy(v);
          if (occ > opts.tau_occ) visit(v, occ);
        }
  };

  ExtractedProblem out;
  for (const auto& w : s.waypoints) {
    const auto own = g.voxel_of(w.position);
    if (!own) throw InvalidArgument(fmt::format("waypoint '{}' lies outside the grid", w.id));
    if (g.occupancy(*own) > opts.tau_occ) throw WaypointInOccupiedVoxel(w.id);
    bool critical = false;
    occupied_near(w.position, w.position, [&](const VoxelIndex& v, double) {
      const auto [lo, hi] = voxel_box(v);
      if (distance_to_box(w.position, lo, hi) <= opts.clearance) critical = true;
    });
    out.critical.push_back(critical);
  }

  for (const auto& e : s.edges) {
    const auto a = s.waypoint_index(e.from);
    const auto b = s.waypoint_index(e.to);
    if (!a || !b) throw InvalidArgument(fmt::format("edge '{}'-'{}' references unknown waypoints", e.from, e.to));
    const Eigen::Vector3d p = s.waypoints[*a].position;
    const Eigen::Vector3d q = s.waypoints[*b].position;
    double worst = 0.0;
    occupied_near(p.cwiseMin(q), p.cwiseMax(q), [&](const VoxelIndex& v, double occ) {
      if (occ <= worst) return;
      const auto [lo, hi] = voxel_box(v);
      const double d = convex_min([&](double t) { return distance_to_box(p + t * (q - p), lo, hi); });
      if (d <= opts.clearance) worst = occ;
    });
    out.edge_probability.push_back(std::clamp(opts.kappa * worst, 0.0, opts.max_probability));
  }
  return out;
}

Scenario apply_extraction(Scenario s, const ExtractedProblem& p) {
  for (std::size_t i = 0; i < s.waypoints.size() && i < p.critical.size(); ++i) s.waypoints[i].critical = p.critical[i];
  for (std::size_t i = 0; i < s.edges.size() && i < p.edge_probability.size(); ++i)
    s.edges[i].collision_probability = p.edge_probability[i];
  return s;
}

std::string grid_to_csv(const VoxelGrid& g) {
  std::string out = "ix,iy,iz,occupancy\n";
  g.for_each([&](const VoxelIndex& v, double l) {
    if (std::abs(l) > 0.01) out += fmt::format("{},{},{},{:.6f}\n", v[0], v[1], v[2], logistic(l));
  });
  return out;
}

}  // namespace riskplan
