#include "riskplan/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "riskplan/errors.hpp"
#include "riskplan/occupancy.hpp"
#include "riskplan/plan_io.hpp"

namespace riskplan {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(const SeedTuple& seed) {
  return splitmix64(splitmix64(splitmix64(seed.master) ^ fnv1a(seed.plan_id)) ^ seed.episode);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stage) {
  return splitmix64(splitmix64(master) ^ fnv1a(stage));
}

EpisodeRecord run_episode(const Trajectory& traj, const Scenario& s, const DisturbanceConfig& cfg,
                          const SeedTuple& seed) {
  if (traj.samples.empty()) throw InvalidArgument("cannot simulate an empty trajectory");
  if (!(cfg.dt > 0.0)) throw InvalidArgument("simulation time step must be positive");
  if (!(cfg.current_sigma >= 0.0 && cfg.obstacle_sigma >= 0.0 && cfg.capture_radius >= 0.0 &&
        cfg.clearance >= 0.0 && cfg.recovery_penalty >= 0.0))
    throw InvalidArgument("disturbance parameters must be non-negative");
  if (!(std::abs(cfg.drift_correlation) < 1.0)) throw InvalidArgument("drift correlation must lie in (-1,1)");

  std::mt19937_64 rng(derive_seed(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian3 = [&] {
    const double x = normal(rng), y = normal(rng), z = normal(rng);
    return Eigen::Vector3d(x, y, z);
  };

  struct Body {
    std::string label;
    Eigen::Vector3d lo, hi;
  };
  std::vector<Body> bodies;
  for (const auto& o : s.obstacles) {
    Eigen::Vector3d center = o.center;
    if (cfg.perturb_all || o.perturbable) center += cfg.obstacle_sigma * gaussian3();
    if (auto it = cfg.forced_offsets.find(o.label); it != cfg.forced_offsets.end()) center += it->second;
    bodies.push_back({o.label, center - o.half_extents, center + o.half_extents});
  }

  EpisodeRecord rec;
  rec.plan_id = seed.plan_id;
  rec.episode = seed.episode;
  rec.seed = seed;

  const auto& samples = traj.samples;
  const double limit = 10.0 * traj.duration;
  const double rho = cfg.drift_correlation;
  const double innovation = std::sqrt(1.0 - rho * rho);

  Eigen::Vector3d pos = samples.front().position;
  Eigen::Vector3d drift = Eigen::Vector3d::Zero();
  double motion_clock = 0.0;
  double penalty = 0.0;
  std::vector<bool> inside(bodies.size(), false);
  std::size_t next = 1;
  bool aborted = false;

  // Returns false when the episode must stop.
  auto check_incidents = [&] {
    for (std::size_t b = 0; b < bodies.size(); ++b) {
      const double d = distance_to_box(pos, bodies[b].lo, bodies[b].hi);
      if (d < cfg.clearance) {
        if (!inside[b]) {
          inside[b] = true;
          rec.incidents.push_back({motion_clock + penalty, bodies[b].label, d});
          if (cfg.abort_on_incident) return false;
          penalty += cfg.recovery_penalty;
        } else {
          for (auto it = rec.incidents.rbegin(); it != rec.incidents.rend(); ++it) {
            if (it->obstacle == bodies[b].label) {
              it->min_distance = std::min(it->min_distance, d);
              break;
            }
          }
        }
      } else {
        inside[b] = false;
      }
    }
    return true;
  };

  aborted = !check_incidents();
  while (!aborted && next < samples.size()) {
    if (motion_clock + penalty > limit) break;
    double budget = cfg.dt;
    while (budget > 0.0 && next < samples.size()) {
      const auto& target = samples[next];
      // Catch-up speed only applies once the robot is behind schedule.
      const bool late = motion_clock + (cfg.dt - budget) > target.time + 1e-9;
      const double v = late ? std::max(target.speed, cfg.min_chase_speed) : target.speed;
      const Eigen::Vector3d to = target.position - pos;
      const double d = to.norm();
      if (d <= v * budget) {
        pos = target.position;
        budget -= v > 0.0 ? d / v : 0.0;
        ++next;
      } else {
        pos += to * (v * budget / d);
        budget = 0.0;
      }
    }
    if (next == samples.size()) {
      motion_clock += cfg.dt - budget;
      aborted = !check_incidents();
      break;
    }
    motion_clock += cfg.dt;
    if (cfg.current_sigma > 0.0) {
      drift = rho * drift + innovation * cfg.current_sigma * gaussian3();
      pos += drift * cfg.dt;
    }
    while (next < samples.size() && (samples[next].position - pos).norm() <= cfg.capture_radius &&
           samples[next].time <= motion_clock + 1e-9)
      ++next;
    aborted = !check_incidents();
  }

  rec.execution_time = motion_clock + penalty;
  rec.completed = !aborted && next == samples.size() && rec.execution_time <= limit;
  return rec;
}

std::vector<EpisodeRecord> run_batch(const Trajectory& traj, const Scenario& s, const DisturbanceConfig& cfg,
                                     std::size_t n, std::uint64_t master_seed, unsigned threads) {
  if (n == 0) throw InvalidArgument("batch needs at least one episode");
  std::vector<EpisodeRecord> out(n);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));

  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = cursor++; i < n; i = cursor++) {
      try {
        out[i] = run_episode(traj, s, cfg, SeedTuple{master_seed, traj.plan_id, i});
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

nlohmann::json to_json(const EpisodeRecord& r) {
  nlohmann::json incidents = nlohmann::json::array();
  for (const auto& i : r.incidents)
    incidents.push_back({{"time", i.time}, {"obstacle", i.obstacle}, {"min_distance", i.min_distance}});
  return {{"plan_id", r.plan_id},
          {"episode", r.episode},
          {"execution_time", r.execution_time},
          {"completed", r.completed},
          {"incidents", std::move(incidents)},
          {"seed", {{"master", r.seed.master}, {"plan_id", r.seed.plan_id}, {"episode", r.seed.episode}}}};
}

EpisodeRecord episode_from_json(const nlohmann::json& j) {
  using namespace schema;
  expect_keys(j, "", {"plan_id", "episode", "execution_time", "completed", "incidents", "seed"});
  EpisodeRecord r;
  r.plan_id = string(j["plan_id"], ".plan_id");
  r.episode = unsigned_integer(j["episode"], ".episode");
  r.execution_time = number(j["execution_time"], ".execution_time");
  r.completed = boolean(j["completed"], ".completed");
  const auto& inc = array(j["incidents"], ".incidents");
  for (std::size_t i = 0; i < inc.size(); ++i) {
    const auto path = fmt::format(".incidents[{}]", i);
    expect_keys(inc[i], path, {"time", "obstacle", "min_distance"});
    r.incidents.push_back({number(inc[i]["time"], path + ".time"), string(inc[i]["obstacle"], path + ".obstacle"),
                           number(inc[i]["min_distance"], path + ".min_distance")});
  }
  const auto& seed = j["seed"];
  expect_keys(seed, ".seed", {"master", "plan_id", "episode"});
  r.seed = {unsigned_integer(seed["master"], ".seed.master"), string(seed["plan_id"], ".seed.plan_id"),
            unsigned_integer(seed["episode"], ".seed.episode")};
  return r;
}

std::string episodes_to_jsonl(const std::vector<EpisodeRecord>& records,
                              const std::optional<Provenance>& provenance) {
  std::string out;
  if (provenance)
    out += nlohmann::json{{"format_version", kFormatVersion}, {"provenance", to_json(*provenance)}}.dump() + "\n";
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

std::vector<EpisodeRecord> episodes_from_jsonl(const std::string& text) {
  std::vector<EpisodeRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw SchemaMismatch(fmt::format("line {}", line_no), "not valid JSON");
    if (out.empty() && j.is_object() && j.contains("provenance")) {
      schema::expect_keys(j, "", {"format_version", "provenance"});
      provenance_from_json(j["provenance"], ".provenance");
      continue;
    }
    out.push_back(episode_from_json(j));
  }
  return out;
}

nlohmann::json to_json(const DisturbanceConfig& c) {
  nlohmann::json forced = nlohmann::json::object();
  for (const auto& [label, v] : c.forced_offsets) forced[label] = {v.x(), v.y(), v.z()};
  return {{"current_sigma", c.current_sigma},
          {"obstacle_sigma", c.obstacle_sigma},
          {"capture_radius", c.capture_radius},
          {"clearance", c.clearance},
          {"recovery_penalty", c.recovery_penalty},
          {"drift_correlation", c.drift_correlation},
          {"perturb_all", c.perturb_all},
          {"abort_on_incident", c.abort_on_incident},
          {"min_chase_speed", c.min_chase_speed},
          {"dt", c.dt},
          {"forced_offsets", std::move(forced)}};
}

DisturbanceConfig disturbance_from_json(const nlohmann::json& j, const std::string& path) {
  using namespace schema;
  const std::vector<std::string> keys{"current_sigma",     "obstacle_sigma", "capture_radius", "clearance",
                                      "recovery_penalty",  "drift_correlation", "perturb_all",
                                      "abort_on_incident", "min_chase_speed", "dt", "forced_offsets"};
  expect_keys(j, path, {}, keys);
  DisturbanceConfig c;
  auto num = [&](const char* key, double& out) {
    if (j.contains(key)) out = number(j[key], path + "." + key);
  };
  num("current_sigma", c.current_sigma);
  num("obstacle_sigma", c.obstacle_sigma);
  num("capture_radius", c.capture_radius);
  num("clearance", c.clearance);
  num("recovery_penalty", c.recovery_penalty);
  num("drift_correlation", c.drift_correlation);
  num("min_chase_speed", c.min_chase_speed);
  num("dt", c.dt);
  if (j.contains("perturb_all")) c.perturb_all = boolean(j["perturb_all"], path + ".perturb_all");
  if (j.contains("abort_on_incident")) c.abort_on_incident = boolean(j["abort_on_incident"], path + ".abort_on_incident");
  if (j.contains("forced_offsets")) {
    const auto& f = j["forced_offsets"];
    expect_object(f, path + ".forced_offsets");
    for (const auto& [label, v] : f.items()) {
      const auto p = path + ".forced_offsets." + label;
      if (!v.is_array() || v.size() != 3) throw SchemaMismatch(p, "expected [x, y, z]");
      c.forced_offsets[label] = Eigen::Vector3d(number(v[0], p + "[0]"), number(v[1], p + "[1]"), number(v[2], p + "[2]"));
    }
  }
  return c;
}

}  // namespace riskplan
