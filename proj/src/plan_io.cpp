#include "riskplan/plan_io.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "riskplan/errors.hpp"

namespace riskplan {

using nlohmann::json;

namespace schema {

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaMismatch(path.empty() ? "." : path, "expected an object");
}

void expect_keys(const json& j, const std::string& path, const std::vector<std::string>& required,
                 const std::vector<std::string>& optional) {
  expect_object(j, path);
  for (const auto& key : required)
    if (!j.contains(key)) throw SchemaMismatch(path + "." + key, "missing required field");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                       std::find(optional.begin(), optional.end(), key) != optional.end();
    if (!known) throw SchemaMismatch(path + "." + key, "unknown field");
  }
}

const json& field(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) throw SchemaMismatch(path + "." + key, "missing required field");
  return j.at(key);
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaMismatch(path, "expected a number");
  return j.get<double>();
}

std::uint64_t unsigned_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0))
    throw SchemaMismatch(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaMismatch(path, "expected a string");
  return j.get<std::string>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw SchemaMismatch(path, "expected a boolean");
  return j.get<bool>();
}

const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaMismatch(path, "expected an array");
  return j;
}

}  // namespace schema

json to_json(const Provenance& p) {
  return json{{"config_hash", p.config_hash}, {"master_seed", p.master_seed}};
}

Provenance provenance_from_json(const json& j, const std::string& path) {
  schema::expect_keys(j, path, {"config_hash", "master_seed"});
  return {schema::string(j["config_hash"], path + ".config_hash"),
          schema::unsigned_integer(j["master_seed"], path + ".master_seed")};
}

PlanFile make_plan_file(const Plan& p) {
  PlanFile f;
  f.plan_id = p.id;
  f.gamma = p.gamma;
  f.actions = p.linearization;
  f.high_level_length = p.linearization.size();
  f.policy.assign(p.policy.begin(), p.policy.end());
  return f;
}

Plan plan_from_file(const PlanFile& f) {
  Plan p;
  p.id = f.plan_id;
  p.gamma = f.gamma;
  p.linearization = f.actions;
  p.policy.insert(f.policy.begin(), f.policy.end());
  return p;
}

json to_json(const PlanFile& f) {
  json policy = json::array();
  for (const auto& [s, a] : f.policy) policy.push_back(json::array({s, a}));
  json j{{"format_version", kFormatVersion},
         {"plan_id", f.plan_id},
         {"gamma", f.gamma},
         {"actions", f.actions},
         {"high_level_length", f.high_level_length},
         {"planning_time_s", f.planning_time_s ? json(*f.planning_time_s) : json(nullptr)},
         {"trajectory", f.trajectory},
         {"policy", std::move(policy)}};
  if (f.provenance) j["provenance"] = to_json(*f.provenance);
  return j;
}

PlanFile plan_file_from_json(const json& j) {
  schema::expect_keys(j, "",
                      {"format_version", "plan_id", "gamma", "actions", "high_level_length",
                       "planning_time_s", "trajectory", "policy"},
                      {"provenance"});
  if (schema::unsigned_integer(j["format_version"], ".format_version") != kFormatVersion)
    throw SchemaMismatch(".format_version", fmt::format("unsupported version (expected {})", kFormatVersion));

  PlanFile f;
  f.plan_id = schema::string(j["plan_id"], ".plan_id");
  f.gamma = schema::number(j["gamma"], ".gamma");
  const auto& actions = schema::array(j["actions"], ".actions");
  for (std::size_t i = 0; i < actions.size(); ++i)
    f.actions.push_back(schema::string(actions[i], fmt::format(".actions[{}]", i)));
  f.high_level_length = schema::unsigned_integer(j["high_level_length"], ".high_level_length");
  if (f.high_level_length != f.actions.size())
    throw SchemaMismatch(".high_level_length",
                         fmt::format("{} does not match {} actions", f.high_level_length, f.actions.size()));
  if (!j["planning_time_s"].is_null())
    f.planning_time_s = schema::number(j["planning_time_s"], ".planning_time_s");
  f.trajectory = schema::string(j["trajectory"], ".trajectory");
  const auto& policy = schema::array(j["policy"], ".policy");
  for (std::size_t i = 0; i < policy.size(); ++i) {
    const auto path = fmt::format(".policy[{}]", i);
    const auto& entry = schema::array(policy[i], path);
    if (entry.size() != 2) throw SchemaMismatch(path, "expected [state, action]");
    f.policy.emplace_back(schema::unsigned_integer(entry[0], path + "[0]"),
                          schema::unsigned_integer(entry[1], path + "[1]"));
  }
  if (j.contains("provenance")) f.provenance = provenance_from_json(j["provenance"], ".provenance");
  return f;
}

std::string write_plan_file(const PlanFile& f) { return to_json(f).dump(2) + "\n"; }

PlanFile read_plan_file(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw SchemaMismatch(".", "not valid JSON");
  return plan_file_from_json(j);
}

}  // namespace riskplan
