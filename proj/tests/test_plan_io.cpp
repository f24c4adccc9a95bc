#include <doctest.h>

#include "riskplan/errors.hpp"
#include "riskplan/plan_io.hpp"

using namespace riskplan;
using nlohmann::json;

namespace {

PlanFile sample_plan() {
  PlanFile f;
  f.plan_id = "P2";
  f.gamma = 0.8125;
  f.actions = {"goto tank", "inspect tank", "goto final"};
  f.high_level_length = 3;
  f.trajectory = "trajectories/P2.csv";
  f.policy = {{0, 0}, {2, 1}, {3, 2}};
  f.provenance = Provenance{"00ff00ff00ff00ff", 42};
  return f;
}

std::string mismatch_path(const json& j) {
  try {
    plan_file_from_json(j);
  } catch (const SchemaMismatch& e) {
    return e.path();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("plan files round-trip") {
  const auto f = sample_plan();
  CHECK(read_plan_file(write_plan_file(f)) == f);

  auto timed = f;
  timed.planning_time_s = 0.125;
  timed.provenance.reset();
  CHECK(read_plan_file(write_plan_file(timed)) == timed);
}

TEST_CASE("planning time is null when absent") {
  const auto j = to_json(sample_plan());
  CHECK(j.at("planning_time_s").is_null());
  CHECK(j.at("format_version") == kFormatVersion);
}

TEST_CASE("schema errors carry the offending path") {
  auto j = to_json(sample_plan());
  j.erase("gamma");
  CHECK(mismatch_path(j) == ".gamma");

  j = to_json(sample_plan());
  j["gamma"] = "high";
  CHECK(mismatch_path(j) == ".gamma");

  j = to_json(sample_plan());
  j["actions"][2] = 7;
  CHECK(mismatch_path(j) == ".actions[2]");

  j = to_json(sample_plan());
  j["colour"] = "red";
  CHECK(mismatch_path(j) == ".colour");

  j = to_json(sample_plan());
  j["provenance"].erase("master_seed");
  CHECK(mismatch_path(j) == ".provenance.master_seed");

  j = to_json(sample_plan());
  j["high_level_length"] = 4;
  CHECK(mismatch_path(j) == ".high_level_length");

  j = to_json(sample_plan());
  j["format_version"] = 2;
  CHECK(mismatch_path(j) == ".format_version");
}

TEST_CASE("unparseable text is a schema mismatch") {
  CHECK_THROWS_AS(read_plan_file("{not json"), SchemaMismatch);
  CHECK_THROWS_AS(read_plan_file("[]"), SchemaMismatch);
}

TEST_CASE("plans convert to and from files") {
  Plan p;
  p.id = "P1";
  p.gamma = 0.5;
  p.policy = {{0, 3}, {4, 1}};
  p.linearization = {"goto a", "goto b"};
  const auto f = make_plan_file(p);
  CHECK(f.high_level_length == 2);
  const auto back = plan_from_file(f);
  CHECK(back.id == p.id);
  CHECK(back.gamma == p.gamma);
  CHECK(back.policy == p.policy);
  CHECK(back.linearization == p.linearization);
}
