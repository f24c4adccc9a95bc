#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskplan/assessment.hpp"
#include "riskplan/occupancy.hpp"
#include "riskplan/plan_io.hpp"
#include "riskplan/risk_planner.hpp"
#include "riskplan/scenario.hpp"
#include "riskplan/simulator.hpp"
#include "riskplan/trajectory.hpp"

namespace riskplan {

struct MappingOptions {
  double resolution = 0.5;
  double margin = 2.0;
  std::size_t beams = 64;
  double aperture = 2.2689280275926285;  // 130 degrees
  std::size_t headings = 8;
  std::vector<double> elevations{-0.2, 0.0, 0.2};
  double max_range = 20.0;
  double range_sigma = 0.05;
  SensorModel sensor;
  ExtractionOptions extraction;
};

/// Sonar sweep from every waypoint: `headings` evenly spaced yaw angles,
/// one horizontal fan per elevation.
VoxelGrid map_scenario(const Scenario& s, const MappingOptions& opts, std::mt19937_64& rng);

struct PipelineConfig {
  std::string scenario_path;
  std::uint64_t master_seed = 0;
  CandidateOptions candidates;
  std::size_t episodes = 10;
  DisturbanceConfig disturbance;
  MetricConfig metrics;
  double alpha_mean = 0.05;
  GroundingOptions grounding;
  RefineOptions refine;
  /// Re-derive critical flags and edge risks from a synthetic sonar map.
  bool build_map = false;
  MappingOptions mapping;
  std::string output_dir = "out";
  /// Simulation worker count; never affects results.
  unsigned threads = 0;
  /// Write wall-clock planning times into the summary and plan files.
  bool record_timings = false;
};

nlohmann::json to_json(const PipelineConfig& c);
/// Strict reader; fields absent from `j` keep their values in `base`.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});

/// FNV-1a over the canonical config JSON (excluding output location and
/// thread count) and the scenario text, as 16 hex digits.
std::string config_hash(const PipelineConfig& c, const std::string& scenario_text);

struct PlanAssessment {
  Candidate candidate;
  Trajectory trajectory;
  std::vector<EpisodeRecord> episodes;
  std::vector<double> samples;
};

struct AssessmentReport {
  Provenance provenance;
  MetricConfig metric_config;
  double alpha_mean = 0.05;
  struct PlanEntry {
    std::string plan_id;
    double gamma = 0.0;
    std::vector<double> gammas;
    std::vector<std::string> actions;
    std::size_t high_level_length = 0;
    double low_level_length = 0.0;
    double nominal_duration = 0.0;
    std::vector<double> samples;
    std::size_t incidents = 0;
    std::size_t completed = 0;
    std::optional<RiskMetrics> metrics;
  };
  std::vector<PlanEntry> plans;
  Selection selection;
  struct Comparison {
    std::string plan_id;
    WelchResult welch;
  };
  std::vector<Comparison> comparisons;
};

nlohmann::json to_json(const AssessmentReport& r);
AssessmentReport assessment_report_from_json(const nlohmann::json& j);

/// Builds the report for assessed plans: metrics, selection and Welch
/// comparisons of the winner against every rival. Plans with fewer than two
/// samples carry no metrics and take no part in selection.
AssessmentReport assess_plans(const std::vector<PlanAssessment>& plans, const MetricConfig& cfg, double alpha_mean,
                              const Provenance& provenance);

inline const std::vector<std::string> kSummaryColumns{
    "ID", "plan schema", "planning time [s]", "high-level length", "low-level length",
    "mean [s]", "variance", "entropy"};

/// Per-plan summary as CSV; planning times print as "-" when absent.
std::string summary_csv(const AssessmentReport& r, const std::vector<std::optional<double>>& planning_times,
                        const Provenance& provenance);
std::string summary_text(const AssessmentReport& r, const std::vector<std::optional<double>>& planning_times);

struct PipelineOutcome {
  int exit_code = 0;
  std::optional<AssessmentReport> report;
  std::vector<PlanAssessment> plans;
  std::string summary;
};

/// Parse, optionally map, ground, generate candidates, refine, simulate,
/// assess and select, writing every artifact under `output_dir`. Failures
/// produce `error.json` and exit code 2 (input) or 1 (internal).
PipelineOutcome run_pipeline(const PipelineConfig& cfg);

/// Exit code for an exception escaping a stage.
int exit_code_for(const std::exception& e);

/// "# config_hash=<hash> master_seed=<seed>" header for CSV artifacts.
std::string csv_provenance(const Provenance& p);

void write_file(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace riskplan
