#include "riskplan/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "riskplan/errors.hpp"

namespace riskplan {

namespace {

struct ProfileNode {
  Eigen::Vector3d position;
  double speed = 0.0;
  double time = 0.0;
  bool vertex = false;
};

// Rest-to-rest profile along one polyline, appended to `nodes` starting at
// time `t0`.
void profile_polyline(const std::vector<Eigen::Vector3d>& poly, double t0, const RefineOptions& opts,
                      const auto& speed_cap, std::vector<ProfileNode>& nodes) {
  std::vector<ProfileNode> local;
  std::vector<double> ds;
  local.push_back({poly.front(), 0.0, 0.0, true});
  for (std::size_t i = 1; i < poly.size(); ++i) {
    const Eigen::Vector3d a = poly[i - 1], b = poly[i];
    const double len = (b - a).norm();
    if (len == 0.0) continue;
    const auto pieces = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / opts.arc_step)));
    for (std::size_t k = 1; k <= pieces; ++k) {
      local.push_back({a + (b - a) * (static_cast<double>(k) / pieces), 0.0, 0.0, k == pieces});
      ds.push_back(len / pieces);
    }
  }
  if (local.size() < 2) return;

  std::vector<double> limit(local.size());
  for (std::size_t j = 0; j < local.size(); ++j) limit[j] = speed_cap(local[j].position);
  const double two_a = 2.0 * opts.a_max;
  for (std::size_t j = 0; j + 1 < local.size(); ++j)
    local[j + 1].speed = std::min(limit[j + 1], std::sqrt(local[j].speed * local[j].speed + two_a * ds[j]));
  local.back().speed = 0.0;
  for (std::size_t j = local.size() - 1; j-- > 0;)
    local[j].speed = std::min(local[j].speed, std::sqrt(local[j + 1].speed * local[j + 1].speed + two_a * ds[j]));

  local.front().time = t0;
  for (std::size_t j = 0; j + 1 < local.size(); ++j)
    local[j + 1].time = local[j].time + 2.0 * ds[j] / (local[j].speed + local[j + 1].speed);

  // The first node coincides with the previous segment's last one.
  const std::size_t skip = nodes.empty() ? 0 : 1;
  nodes.insert(nodes.end(), local.begin() + static_cast<std::ptrdiff_t>(skip), local.end());
}

Eigen::Vector3d position_at(const std::vector<ProfileNode>& nodes, double t) {
  auto it = std::upper_bound(nodes.begin(), nodes.end(), t,
                             [](double value, const ProfileNode& n) { return value < n.time; });
  if (it == nodes.begin()) return nodes.front().position;
  if (it == nodes.end()) return nodes.back().position;
  const auto& a = *(it - 1);
  const auto& b = *it;
  const double ds = (b.position - a.position).norm();
  if (ds == 0.0) return a.position;
  const double tau = t - a.time;
  const double accel = (b.speed * b.speed - a.speed * a.speed) / (2.0 * ds);
  const double s = std::clamp(a.speed * tau + 0.5 * accel * tau * tau, 0.0, ds);
  return a.position + (b.position - a.position) * (s / ds);
}

}  // namespace

std::vector<Eigen::Vector3d> helix_around(const Obstacle& o, const Eigen::Vector3d& from, const RefineOptions& opts) {
  const double radius = std::max(o.half_extents.x(), o.half_extents.y()) + opts.helix_clearance;
  const double height = 2.0 * o.half_extents.z();
  const Eigen::Vector2d rel = (from - o.center).head<2>();
  const double theta0 = rel.squaredNorm() > 0.0 ? std::atan2(rel.y(), rel.x()) : 0.0;
  std::vector<Eigen::Vector3d> out;
  for (std::size_t k = 1; k <= opts.helix_points; ++k) {
    const double f = static_cast<double>(k) / opts.helix_points;
    const double theta = theta0 + 2.0 * std::numbers::pi * opts.helix_turns * f;
    out.emplace_back(o.center.x() + radius * std::cos(theta), o.center.y() + radius * std::sin(theta),
                     from.z() + height * f);
  }
  return out;
}

Trajectory refine(const Scenario& s, const std::vector<PlanStep>& steps, const RefineOptions& opts,
                  std::string plan_id) {
  if (!(opts.dt > 0.0)) throw InvalidArgument("refinement time step must be positive");
  if (!(opts.a_max > 0.0 && opts.arc_step > 0.0)) throw InvalidArgument("a_max and arc_step must be positive");

  Trajectory traj;
  traj.plan_id = std::move(plan_id);

  auto start = s.waypoint_index(s.mission.start);
  if (!start) throw InvalidArgument(fmt::format("unknown start waypoint '{}'", s.mission.start));

  std::vector<std::vector<Eigen::Vector3d>> segments;
  std::size_t current = *start;
  for (const auto& step : steps) {
    const auto& here = s.waypoints[current];
    if (step.kind == PlanStep::Kind::Move) {
      auto next = s.waypoint_index(step.waypoint);
      if (!next || !s.find_edge(here.id, step.waypoint)) throw DisconnectedPlan(here.id, step.waypoint);
      segments.push_back({here.position, s.waypoints[*next].position});
      current = *next;
    } else {
      if (here.inspection_target != step.target)
        throw InvalidArgument(fmt::format("waypoint '{}' cannot inspect '{}'", here.id, step.target));
      const auto& obstacle = s.obstacles[*s.obstacle_index(step.target)];
      auto loop = helix_around(obstacle, here.position, opts);
      loop.insert(loop.begin(), here.position);
      loop.push_back(here.position);
      segments.push_back(std::move(loop));
    }
  }

  // Widen the slow zones by one sample interval so that interval-average
  // speeds respect the cap pointwise.
  const double margin = s.limits.v_max * opts.dt + 2.0 * opts.arc_step;
  std::vector<Eigen::Vector3d> critical;
  for (const auto& w : s.waypoints)
    if (w.critical) critical.push_back(w.position);
  auto speed_cap = [&](const Eigen::Vector3d& p) {
    for (const auto& c : critical)
      if ((p - c).norm() <= s.limits.critical_radius + margin) return s.limits.v_crit;
    return s.limits.v_max;
  };

  std::vector<ProfileNode> nodes;
  for (const auto& poly : segments) {
    for (std::size_t i = 1; i < poly.size(); ++i) traj.length += (poly[i] - poly[i - 1]).norm();
    profile_polyline(poly, nodes.empty() ? 0.0 : nodes.back().time, opts, speed_cap, nodes);
  }
  if (nodes.size() < 2) return traj;
  traj.duration = nodes.back().time;

  std::vector<double> times;
  for (const auto& n : nodes)
    if (n.vertex) times.push_back(n.time);
  const auto vertex_count = times.size();
  for (std::size_t k = 0; k * opts.dt < traj.duration; ++k) {
    const double t = static_cast<double>(k) * opts.dt;
    auto it = std::lower_bound(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(vertex_count), t);
    const bool near_after = it != times.begin() + static_cast<std::ptrdiff_t>(vertex_count) && *it - t < 1e-6;
    const bool near_before = it != times.begin() && t - *(it - 1) < 1e-6;
    if (!near_after && !near_before) times.push_back(t);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  for (double t : times) traj.samples.push_back({t, position_at(nodes, t), 0.0});
  traj.samples.back().position = nodes.back().position;
  for (std::size_t k = 1; k < traj.samples.size(); ++k) {
    auto& cur = traj.samples[k];
    const auto& prev = traj.samples[k - 1];
    cur.speed = (cur.position - prev.position).norm() / (cur.time - prev.time);
  }
  traj.samples.front().speed = traj.samples[1].speed;
  return traj;
}

double low_level_length(const Trajectory& t) {
  double len = 0.0;
  for (std::size_t k = 1; k < t.samples.size(); ++k)
    len += (t.samples[k].position - t.samples[k - 1].position).norm();
  return len;
}

std::string trajectory_to_csv(const Trajectory& t) {
  std::string out = "t,x,y,z,v\n";
  for (const auto& s : t.samples)
    out += fmt::format("{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", s.time, s.position.x(), s.position.y(),
                       s.position.z(), s.speed);
  return out;
}

}  // namespace riskplan
