#include <doctest.h>

#include <algorithm>

#include "riskplan/errors.hpp"
#include "riskplan/pipeline.hpp"
#include "riskplan/scenario.hpp"
#include "support.hpp"

using namespace riskplan;

namespace {

Scenario load(const std::string& name) {
  auto parsed = parse_scenario(read_file(testsupport::data_path(name)));
  REQUIRE(parsed.ok());
  return *parsed.scenario;
}

bool has_kind(const ParseResult& r, const std::string& kind) {
  return std::any_of(r.diagnostics.begin(), r.diagnostics.end(), [&](const auto& d) { return d.kind == kind; });
}

}  // namespace

TEST_CASE("tank fixture has six waypoints, four of them critical") {
  const auto s = load("tanks.scn");
  CHECK(s.waypoints.size() == 6);
  CHECK(std::count_if(s.waypoints.begin(), s.waypoints.end(), [](const auto& w) { return w.critical; }) == 4);
  CHECK(s.mission.inspect == std::vector<std::string>{"lg_tank", "quad_tank"});
  REQUIRE(s.obstacle_index("sm_tank"));
  CHECK(s.obstacles[*s.obstacle_index("sm_tank")].perturbable);
}

TEST_CASE("mission referencing a missing waypoint is an unknown reference") {
  const auto r = parse_scenario("MISSION start=a final=a\n");
  CHECK_FALSE(r.ok());
  CHECK(has_kind(r, "UnknownReference"));
}

TEST_CASE("duplicate waypoint ids are reported with their line") {
  const auto r = parse_scenario(
      "WAYPOINT a pos=0,0,0\n"
      "WAYPOINT a pos=1,0,0\n"
      "MISSION start=a final=a\n");
  CHECK_FALSE(r.ok());
  REQUIRE(has_kind(r, "DuplicateId"));
  const auto it = std::find_if(r.diagnostics.begin(), r.diagnostics.end(), [](auto& d) { return d.kind == "DuplicateId"; });
  CHECK(it->line == 2);
}

TEST_CASE("syntax errors carry line and column") {
  const auto r = parse_scenario(
      "WAYPOINT a pos=0,0,0\n"
      "WAYPOINT b pos=1,zero,0\n"
      "MISSION start=a final=b\n");
  CHECK_FALSE(r.ok());
  REQUIRE_FALSE(r.diagnostics.empty());
  CHECK(r.diagnostics.front().line == 2);
  CHECK(r.diagnostics.front().column > 0);
}

TEST_CASE("parser never throws on arbitrary input") {
  const std::vector<std::string> inputs{"", "\n\n", "EDGE", "WAYPOINT", "LIMITS v_max=-1", "OBSTACLE o center=1,2",
                                        "WAYPOINT a pos=0,0,0 inspect=", "MISSION start= final=", "\"unterminated",
                                        "EDGE a a p=2", "WAYPOINT a pos=nan,0,0\nMISSION start=a final=a"};
  for (const auto& text : inputs) {
    ParseResult r;
    CHECK_NOTHROW(r = parse_scenario(text));
    CHECK_FALSE(r.ok());
    CHECK_FALSE(r.diagnostics.empty());
  }
}

TEST_CASE("edge probabilities must lie in [0,1)") {
  const auto r = parse_scenario(
      "WAYPOINT a pos=0,0,0\nWAYPOINT b pos=1,0,0\nEDGE a b p=1.0\nMISSION start=a final=b\n");
  CHECK(has_kind(r, "InvalidValue"));
}

TEST_CASE("written scenarios parse back to the same content") {
  for (const auto* name : {"tanks.scn", "tank_hop.scn"}) {
    const auto s = load(name);
    const auto again = parse_scenario(write_scenario(s));
    REQUIRE(again.ok());
    CHECK(write_scenario(*again.scenario) == write_scenario(s));
    CHECK(again.scenario->waypoints.size() == s.waypoints.size());
    CHECK(again.scenario->edges.size() == s.edges.size());
  }
}

TEST_CASE("three-waypoint tank scenario grounds to 3 x 2 + 1 states") {
  const auto g = ground_to_mdp(load("tank_hop.scn"));
  CHECK(g.mdp.states.size() == 7);
  CHECK(g.collided == 6);
  CHECK(validate(g.mdp).empty());
  REQUIRE(g.mdp.goals.size() == 1);
  const auto goal = *g.mdp.goals.begin();
  CHECK(g.mdp.states[goal].label == "final[1]");
  CHECK(g.mdp.states[g.mdp.start].label == "initial[0]");
}

TEST_CASE("state count is waypoints x 2^targets + 1") {
  const auto s = load("tanks.scn");
  for (auto model : {CollisionModel::Restart, CollisionModel::Absorbing}) {
    GroundingOptions opts;
    opts.collision = model;
    const auto g = ground_to_mdp(s, opts);
    CHECK(g.mdp.states.size() == s.waypoints.size() * 4 + 1);
    CHECK(validate(g.mdp).empty());
  }
}

TEST_CASE("moves fail into the collided state with the edge probability") {
  const auto g = ground_to_mdp(load("tank_hop.scn"));
  const auto from = g.encode(0, 0);
  double to_collided = 0.0, to_tank = 0.0;
  for (const auto& t : g.mdp.transitions) {
    if (t.source != from || g.mdp.actions[t.action].label != "goto tank") continue;
    if (t.target == g.collided) to_collided += t.probability;
    if (t.target == g.encode(1, 0)) to_tank += t.probability;
  }
  CHECK(to_collided == doctest::Approx(0.1));
  CHECK(to_tank == doctest::Approx(0.9));
}

TEST_CASE("absorbing collision leaves the collided state without actions") {
  GroundingOptions opts;
  opts.collision = CollisionModel::Absorbing;
  const auto g = ground_to_mdp(load("tank_hop.scn"), opts);
  for (const auto& t : g.mdp.transitions) CHECK(t.source != g.collided);
  CHECK_FALSE(g.mdp.is_goal(g.collided));
}

TEST_CASE("restart collision returns to the start with nothing inspected") {
  const auto g = ground_to_mdp(load("tank_hop.scn"));
  bool found = false;
  for (const auto& t : g.mdp.transitions) {
    if (t.source != g.collided) continue;
    found = true;
    CHECK(g.mdp.actions[t.action].label == "recover");
    CHECK(t.target == g.mdp.start);
  }
  CHECK(found);
  CHECK(g.mdp.states[g.collided].cost == doctest::Approx(10.0));
}

TEST_CASE("zero inspection targets make the final waypoint the goal") {
  auto s = load("tank_hop.scn");
  s.mission.inspect.clear();
  const auto g = ground_to_mdp(s);
  CHECK(g.mdp.states.size() == 4);
  REQUIRE(g.mdp.goals.size() == 1);
  CHECK(g.mdp.states[*g.mdp.goals.begin()].label == "final");
}

TEST_CASE("risk-free edges never reach the collided state") {
  auto s = load("tank_hop.scn");
  for (auto& e : s.edges) e.collision_probability = 0.0;
  const auto g = ground_to_mdp(s);
  for (const auto& t : g.mdp.transitions) CHECK(t.target != g.collided);
}

TEST_CASE("a target nobody can inspect is ungroundable") {
  auto s = load("tank_hop.scn");
  s.waypoints[1].inspection_target.reset();
  CHECK_THROWS_AS(ground_to_mdp(s), UngroundableGoal);
}

TEST_CASE("plan steps from action labels") {
  const auto steps = steps_from_actions({"goto tank", "inspect tank", "goto final"});
  REQUIRE(steps.size() == 3);
  CHECK(steps[0].kind == PlanStep::Kind::Move);
  CHECK(steps[0].waypoint == "tank");
  CHECK(steps[1].kind == PlanStep::Kind::Inspect);
  CHECK(steps[1].target == "tank");
  CHECK_THROWS_AS(steps_from_actions({"fly away"}), InvalidArgument);
}
