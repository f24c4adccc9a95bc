#include <doctest.h>

#include <cmath>

#include "riskplan/errors.hpp"
#include "riskplan/pipeline.hpp"
#include "riskplan/trajectory.hpp"
#include "support.hpp"

using namespace riskplan;

namespace {

// "a" at the origin and "b" 10 m along x, joined by one edge.
Scenario straight(bool critical_start, double critical_radius) {
  Scenario s;
  Waypoint a, b;
  a.id = "a";
  a.critical = critical_start;
  b.id = "b";
  b.position = {10, 0, 0};
  s.waypoints = {a, b};
  s.edges = {{"a", "b", 0.0}};
  s.mission.start = "a";
  s.mission.final = "b";
  s.limits = {1.0, 0.25, critical_radius};
  return s;
}

std::vector<PlanStep> move_to(const std::string& id) { return {{PlanStep::Kind::Move, id, {}}}; }

// Rest-to-rest time over length L: capped at vc for the first z metres, at vm after.
double two_zone_time(double L, double z, double vc, double vm, double a) {
  const double t_slow = vc / a + (z - vc * vc / (2 * a)) / vc;
  const double up = (vm * vm - vc * vc) / (2 * a);
  const double down = vm * vm / (2 * a);
  return t_slow + (vm - vc) / a + (L - z - up - down) / vm + vm / a;
}

Scenario tanks() {
  auto parsed = parse_scenario(read_file(testsupport::data_path("tanks.scn")));
  REQUIRE(parsed.ok());
  return *parsed.scenario;
}

}  // namespace

TEST_CASE("a free 10 m segment takes 12 s with v_max 1 and a_max 0.5") {
  const auto t = refine(straight(false, 2.0), move_to("b"));
  CHECK(t.duration == doctest::Approx(12.0).epsilon(1e-3));
  CHECK(t.length == doctest::Approx(10.0));
  CHECK(t.samples.front().time == 0.0);
  CHECK(t.samples.back().position.isApprox(Eigen::Vector3d(10, 0, 0)));
}

TEST_CASE("a segment wholly inside a critical radius runs at v_crit") {
  const auto t = refine(straight(true, 20.0), move_to("b"));
  CHECK(t.duration == doctest::Approx(10.0 / 0.25 + 0.25 / 0.5).epsilon(1e-3));
  for (const auto& s : t.samples) CHECK(s.speed <= 0.25 + 1e-9);
}

TEST_CASE("a segment leaving a critical zone speeds up after it") {
  RefineOptions opts;
  const auto s = straight(true, 2.0);
  const auto t = refine(s, move_to("b"), opts);
  const double zone = 2.0 + s.limits.v_max * opts.dt + 2.0 * opts.arc_step;
  CHECK(t.duration == doctest::Approx(two_zone_time(10.0, zone, 0.25, 1.0, 0.5)).epsilon(2e-3));
}

TEST_CASE("an empty plan gives an empty trajectory") {
  const auto t = refine(straight(false, 2.0), {});
  CHECK(t.samples.empty());
  CHECK(t.duration == 0.0);
}

TEST_CASE("samples lie on the dt grid plus polyline vertices") {
  RefineOptions opts;
  opts.dt = 0.5;
  const auto t = refine(straight(false, 2.0), move_to("b"), opts);
  for (std::size_t k = 1; k < t.samples.size(); ++k) CHECK(t.samples[k].time > t.samples[k - 1].time);
  for (const auto& s : t.samples) {
    const bool on_grid = std::abs(s.time / 0.5 - std::round(s.time / 0.5)) < 1e-9;
    const bool vertex = s.position.isApprox(Eigen::Vector3d(10, 0, 0));
    CHECK((on_grid || vertex));
  }
}

TEST_CASE("property: speeds respect v_max everywhere and v_crit near critical waypoints") {
  const auto s = tanks();
  const auto steps = steps_from_actions(
      {"goto w_lg", "inspect lg_tank", "goto w_quad", "inspect quad_tank", "goto w_sm", "goto final"});
  const auto t = refine(s, steps);
  REQUIRE(t.samples.size() > 100);
  std::size_t slow = 0;
  for (std::size_t k = 1; k < t.samples.size(); ++k) {
    const auto& cur = t.samples[k];
    const auto& prev = t.samples[k - 1];
    CHECK(cur.speed <= s.limits.v_max + 1e-9);
    for (const auto& w : s.waypoints) {
      if (!w.critical) continue;
      if ((cur.position - w.position).norm() <= s.limits.critical_radius &&
          (prev.position - w.position).norm() <= s.limits.critical_radius) {
        ++slow;
        CHECK(cur.speed <= s.limits.v_crit + 1e-9);
      }
    }
  }
  CHECK(slow > 0);
}

TEST_CASE("inspection loops have the configured number of points") {
  Obstacle o;
  o.label = "o";
  o.center = {0, 0, 0};
  o.half_extents = {1, 0.5, 0.5};
  RefineOptions opts;
  const auto loop = helix_around(o, {3, 0, -0.5}, opts);
  CHECK(loop.size() == 50);
  for (const auto& p : loop) CHECK(p.head<2>().norm() == doctest::Approx(2.0));
  CHECK(loop.back().z() == doctest::Approx(0.5));
  CHECK(loop.back().head<2>().isApprox(Eigen::Vector2d(2, 0)));
}

TEST_CASE("moves without an edge are a disconnected plan") {
  const auto s = tanks();
  CHECK_THROWS_AS(refine(s, move_to("final")), DisconnectedPlan);
  CHECK_THROWS_AS(refine(s, {{PlanStep::Kind::Inspect, {}, "lg_tank"}}), InvalidArgument);
}

TEST_CASE("both tank-scenario routes are 20 to 30 m long") {
  const auto s = tanks();
  const std::vector<std::string> common{"goto w_lg", "inspect lg_tank", "goto w_quad", "inspect quad_tank"};
  auto north = common, direct = common;
  north.insert(north.end(), {"goto w_north", "goto final"});
  direct.push_back("goto final");
  for (const auto& actions : {north, direct}) {
    const auto t = refine(s, steps_from_actions(actions));
    const double len = low_level_length(t);
    CHECK(len >= 20.0);
    CHECK(len <= 30.0);
    CHECK(len == doctest::Approx(t.length).epsilon(0.02));
  }
}

TEST_CASE("low-level length sums sample distances") {
  Trajectory t;
  t.samples = {{0.0, {0, 0, 0}, 0.0}, {1.0, {3, 0, 0}, 3.0}};
  CHECK(low_level_length(t) == 3.0);
  t.samples = {{0, {0, 0, 0}, 0}, {1, {1, 0, 0}, 1}, {2, {1, 1, 0}, 1}, {3, {0, 1, 0}, 1}, {4, {0, 0, 0}, 1}};
  CHECK(low_level_length(t) == 4.0);
}

TEST_CASE("trajectory csv has one row per sample") {
  const auto t = refine(straight(false, 2.0), move_to("b"));
  const auto csv = trajectory_to_csv(t);
  CHECK(csv.rfind("t,x,y,z,v\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == t.samples.size() + 1);
}
