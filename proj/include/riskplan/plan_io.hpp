#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskplan/mdp.hpp"

namespace riskplan {

inline constexpr int kFormatVersion = 1;

/// Config hash and master seed stamped on every artifact.
struct Provenance {
  std::string config_hash;
  std::uint64_t master_seed = 0;

  bool operator==(const Provenance&) const = default;
};

struct PlanFile {
  std::string plan_id;
  double gamma = 0.0;
  std::vector<std::string> actions;
  std::size_t high_level_length = 0;
  /// Absent when timings are not recorded.
  std::optional<double> planning_time_s;
  std::string trajectory;
  std::vector<std::pair<StateId, ActionId>> policy;
  std::optional<Provenance> provenance;

  bool operator==(const PlanFile&) const = default;
};

PlanFile make_plan_file(const Plan& p);
Plan plan_from_file(const PlanFile& f);

nlohmann::json to_json(const PlanFile& f);
/// Strict reader: unknown, missing or mistyped keys raise SchemaMismatch
/// carrying the path of the offending key (".gamma", ".actions[2]").
PlanFile plan_file_from_json(const nlohmann::json& j);

std::string write_plan_file(const PlanFile& f);
PlanFile read_plan_file(const std::string& text);

nlohmann::json to_json(const Provenance& p);
Provenance provenance_from_json(const nlohmann::json& j, const std::string& path);

/// Helpers for strict object readers.
namespace schema {

void expect_object(const nlohmann::json& j, const std::string& path);
void expect_keys(const nlohmann::json& j, const std::string& path,
                 const std::vector<std::string>& required,
                 const std::vector<std::string>& optional = {});
const nlohmann::json& field(const nlohmann::json& j, const std::string& path, const std::string& key);
double number(const nlohmann::json& j, const std::string& path);
std::uint64_t unsigned_integer(const nlohmann::json& j, const std::string& path);
std::string string(const nlohmann::json& j, const std::string& path);
bool boolean(const nlohmann::json& j, const std::string& path);
const nlohmann::json& array(const nlohmann::json& j, const std::string& path);

}  // namespace schema

}  // namespace riskplan
