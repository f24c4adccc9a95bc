#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "riskplan/errors.hpp"
#include "riskplan/pipeline.hpp"
#include "riskplan/plot.hpp"
#include "riskplan/scaling.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace riskplan;

namespace {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Scenario load_scenario(const std::string& path, std::string* text = nullptr) {
  const auto contents = read_file(path);
  if (text) *text = contents;
  auto parsed = parse_scenario(contents);
  if (!parsed.ok()) {
    json diags = json::array();
    for (const auto& d : parsed.diagnostics)
      diags.push_back({{"kind", d.kind}, {"line", d.line}, {"column", d.column}, {"message", d.message}});
    std::cerr << json{{"error", "ParseError"}, {"file", path}, {"diagnostics", diags}}.dump(2) << "\n";
    throw InputError(fmt::format("'{}' does not parse", path));
  }
  return std::move(*parsed.scenario);
}

json load_json(const std::string& path) {
  auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw SchemaMismatch(path, "not valid JSON");
  return j;
}

void emit(const std::string& out, const std::string& contents) {
  if (out.empty() || out == "-") {
    std::cout << contents;
  } else {
    write_file(out, contents);
  }
}

void add_mapping_flags(CLI::App* cmd, MappingOptions& m) {
  cmd->add_option("--resolution", m.resolution, "Voxel edge length [m]");
  cmd->add_option("--beams", m.beams, "Beams per sonar fan");
  cmd->add_option("--headings", m.headings, "Sensor headings per waypoint");
  cmd->add_option("--max-range", m.max_range, "Sonar maximum range [m]");
  cmd->add_option("--range-sigma", m.range_sigma, "Range noise standard deviation [m]");
  cmd->add_option("--tau-occ", m.extraction.tau_occ, "Occupancy threshold");
  cmd->add_option("--clearance", m.extraction.clearance, "Clearance radius for extraction [m]");
  cmd->add_option("--kappa", m.extraction.kappa, "Occupancy to collision probability scale");
}

void add_refine_flags(CLI::App* cmd, RefineOptions& r) {
  cmd->add_option("--dt", r.dt, "Trajectory sample period [s]");
  cmd->add_option("--a-max", r.a_max, "Acceleration limit [m/s^2]");
  cmd->add_option("--helix-points", r.helix_points, "Vertices per inspection loop");
}

void add_disturbance_flags(CLI::App* cmd, DisturbanceConfig& d) {
  cmd->add_option("--current-sigma", d.current_sigma, "Current drift standard deviation [m/s]");
  cmd->add_option("--obstacle-sigma", d.obstacle_sigma, "Obstacle displacement standard deviation [m]");
  cmd->add_option("--recovery-penalty", d.recovery_penalty, "Time added per incident [s]");
  cmd->add_option("--capture-radius", d.capture_radius, "Sample capture radius [m]");
  cmd->add_flag("--perturb-all", d.perturb_all, "Displace every obstacle");
}

void add_metric_flags(CLI::App* cmd, MetricConfig& m) {
  cmd->add_option("--bin-width", m.bin_width, "Entropy bin width [s]");
  cmd->add_option("--alpha", m.alpha, "VaR / ES level");
  cmd->add_option("--time-bound", m.time_bound, "Bound for the exceedance probability [s]");
}

PlanFile load_plan(const std::string& path, std::string& text) {
  text = read_file(path);
  auto j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw SchemaMismatch(path, "not valid JSON");
  return plan_file_from_json(j);
}

// Stage artifacts are stamped with the hash of the pipeline config fields the
// stage uses, chained over its input files.
Provenance stage_provenance(const PipelineConfig& cfg, const std::string& inputs) {
  return {config_hash(cfg, inputs), cfg.master_seed};
}

std::vector<std::size_t> parse_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size()) throw InputError(fmt::format("bad {} entry '{}'", what, item));
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// Rows {plan_id, mean, variance, entropy} or a full assessment report.
std::vector<PlanMetrics> load_metric_table(const json& j) {
  if (j.contains("selection")) {
    const auto report = assessment_report_from_json(j);
    std::vector<PlanMetrics> table;
    for (const auto& p : report.plans)
      if (p.metrics) table.push_back({p.plan_id, *p.metrics});
    return table;
  }
  using namespace schema;
  expect_keys(j, "", {"plans"});
  const auto& rows = array(j["plans"], ".plans");
  std::vector<PlanMetrics> table;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto path = fmt::format(".plans[{}]", i);
    expect_keys(rows[i], path, {"plan_id", "mean", "variance", "entropy"});
    PlanMetrics pm;
    pm.plan_id = string(rows[i]["plan_id"], path + ".plan_id");
    pm.metrics.mean = number(rows[i]["mean"], path + ".mean");
    pm.metrics.variance = number(rows[i]["variance"], path + ".variance");
    pm.metrics.entropy_bits = number(rows[i]["entropy"], path + ".entropy");
    table.push_back(std::move(pm));
  }
  return table;
}

int report_failure(const std::string& command, const std::exception& e) {
  const int code = dynamic_cast<const InputError*>(&e) ? 2 : exit_code_for(e);
  json j{{"command", command}, {"exit_code", code}, {"message", e.what()}};
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    j["error"] = err->code();
    if (const auto* sm = dynamic_cast<const SchemaMismatch*>(err)) j["path"] = sm->path();
  } else {
    j["error"] = code == 2 ? "InputError" : "Internal";
  }
  std::cerr << j.dump(2) << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-aware inspection mission planning"};
  app.require_subcommand(1);

  // map
  std::string map_scenario_path, map_out;
  std::uint64_t map_seed = 0;
  MappingOptions map_opts;
  auto* map_cmd = app.add_subcommand("map", "Build an occupancy grid from synthetic sonar scans");
  map_cmd->add_option("--scenario", map_scenario_path, "Scenario file")->required();
  map_cmd->add_option("--seed", map_seed, "Master seed");
  map_cmd->add_option("--out", map_out, "Grid CSV (stdout when omitted)");
  add_mapping_flags(map_cmd, map_opts);

  // gen-problem
  std::string gen_scenario_path, gen_out;
  std::uint64_t gen_seed = 0;
  MappingOptions gen_opts;
  auto* gen_cmd = app.add_subcommand("gen-problem", "Derive critical waypoints and edge risks from a sonar map");
  gen_cmd->add_option("--scenario", gen_scenario_path, "Scenario file")->required();
  gen_cmd->add_option("--seed", gen_seed, "Master seed");
  gen_cmd->add_option("--out", gen_out, "Scenario output (stdout when omitted)");
  add_mapping_flags(gen_cmd, gen_opts);

  // plan
  std::string plan_scenario_path, plan_out = "plans";
  std::uint64_t plan_seed = 0;
  CandidateOptions plan_opts;
  std::string plan_collision = "restart";
  bool plan_timings = false;
  auto* plan_cmd = app.add_subcommand("plan", "Generate candidate plans over sampled risk factors");
  plan_cmd->add_option("--scenario", plan_scenario_path, "Scenario file")->required();
  plan_cmd->add_option("--seed", plan_seed, "Master seed");
  plan_cmd->add_option("--gamma-samples", plan_opts.samples, "Number of sampled risk factors");
  plan_cmd->add_option("--gamma-min", plan_opts.gamma_min, "Lower end of the risk factor interval");
  plan_cmd->add_option("--gamma-max", plan_opts.gamma_max, "Upper end (exclusive)");
  plan_cmd->add_option("--collision", plan_collision, "Collision model")->check(CLI::IsMember({"restart", "absorbing"}));
  plan_cmd->add_option("--out", plan_out, "Output directory");
  plan_cmd->add_flag("--timings", plan_timings, "Record planning times in plan files");

  // refine
  std::string refine_scenario_path, refine_plan, refine_out;
  RefineOptions refine_opts;
  auto* refine_cmd = app.add_subcommand("refine", "Turn a plan into a timed trajectory");
  refine_cmd->add_option("--scenario", refine_scenario_path, "Scenario file")->required();
  refine_cmd->add_option("--plan", refine_plan, "Plan file")->required();
  refine_cmd->add_option("--out", refine_out, "Trajectory CSV (stdout when omitted)");
  add_refine_flags(refine_cmd, refine_opts);

  // simulate
  std::string sim_scenario_path, sim_plan, sim_out;
  std::uint64_t sim_seed = 0;
  std::size_t sim_episodes = 10;
  unsigned sim_threads = 0;
  RefineOptions sim_refine;
  DisturbanceConfig sim_disturbance;
  auto* sim_cmd = app.add_subcommand("simulate", "Run seeded execution episodes for a plan");
  sim_cmd->add_option("--scenario", sim_scenario_path, "Scenario file")->required();
  sim_cmd->add_option("--plan", sim_plan, "Plan file")->required();
  sim_cmd->add_option("--seed", sim_seed, "Master seed")->required();
  sim_cmd->add_option("--episodes", sim_episodes, "Episodes to run");
  sim_cmd->add_option("--threads", sim_threads, "Worker threads (0: hardware concurrency)");
  sim_cmd->add_option("--out", sim_out, "Episode log, JSON lines (stdout when omitted)");
  add_refine_flags(sim_cmd, sim_refine);
  add_disturbance_flags(sim_cmd, sim_disturbance);

  // assess
  std::vector<std::string> assess_logs;
  std::string assess_out;
  MetricConfig assess_metrics;
  double assess_alpha_mean = 0.05;
  auto* assess_cmd = app.add_subcommand("assess", "Compute risk metrics from episode logs");
  assess_cmd->add_option("--episodes", assess_logs, "Episode logs, one per plan")->required();
  assess_cmd->add_option("--out", assess_out, "Report JSON (stdout when omitted)");
  assess_cmd->add_option("--alpha-mean", assess_alpha_mean, "Mean filter tolerance");
  add_metric_flags(assess_cmd, assess_metrics);

  // select
  std::string select_in;
  double select_alpha_mean = 0.05;
  auto* select_cmd = app.add_subcommand("select", "Pick the plan balancing mean and spread");
  select_cmd->add_option("--metrics", select_in, "Assessment report or metric table JSON")->required();
  select_cmd->add_option("--alpha-mean", select_alpha_mean, "Mean filter tolerance");

  // pipeline
  PipelineConfig pipe;
  std::string pipe_config;
  std::optional<std::string> pipe_scenario, pipe_out;
  std::optional<std::uint64_t> pipe_seed;
  std::optional<std::size_t> pipe_samples, pipe_episodes;
  std::optional<double> pipe_gmin, pipe_gmax, pipe_alpha_mean;
  std::optional<unsigned> pipe_threads;
  bool pipe_timings = false, pipe_map = false, pipe_dump = false;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run the full plan, refine, simulate and select pipeline");
  pipe_cmd->add_option("--config", pipe_config, "JSON config; flags override its fields");
  pipe_cmd->add_option("--scenario", pipe_scenario, "Scenario file");
  pipe_cmd->add_option("--seed", pipe_seed, "Master seed (required here or in the config)");
  pipe_cmd->add_option("--out", pipe_out, "Output directory");
  pipe_cmd->add_option("--gamma-samples", pipe_samples, "Number of sampled risk factors");
  pipe_cmd->add_option("--gamma-min", pipe_gmin, "Lower end of the risk factor interval");
  pipe_cmd->add_option("--gamma-max", pipe_gmax, "Upper end (exclusive)");
  pipe_cmd->add_option("--episodes", pipe_episodes, "Episodes per plan");
  pipe_cmd->add_option("--alpha-mean", pipe_alpha_mean, "Mean filter tolerance");
  pipe_cmd->add_option("--threads", pipe_threads, "Simulation worker threads");
  pipe_cmd->add_flag("--timings", pipe_timings, "Write planning times into the summary and plan files");
  pipe_cmd->add_flag("--build-map", pipe_map, "Derive risks from a synthetic sonar map first");
  pipe_cmd->add_flag("--dump-config", pipe_dump, "Print the effective config and exit");

  // scaling
  std::string scale_depths, scale_criticals, scale_out;
  std::uint64_t scale_seed = 0;
  ScalingOptions scale_opts;
  auto* scale_cmd = app.add_subcommand("scaling", "Solve synthetic corridor scenarios of growing size");
  scale_cmd->add_option("--depths", scale_depths, "Comma-separated corridor depths")->required();
  scale_cmd->add_option("--criticals", scale_criticals, "Comma-separated critical-state counts")->required();
  scale_cmd->add_option("--seed", scale_seed, "Master seed")->required();
  scale_cmd->add_option("--gamma-samples", scale_opts.candidates.samples, "Number of sampled risk factors");
  scale_cmd->add_option("--repeats", scale_opts.repeats, "Timing repetitions per scenario");
  scale_cmd->add_option("--out", scale_out, "Scaling table CSV (stdout when omitted)");

  // plot
  std::string plot_report_path, plot_out = "boxplot";
  auto* plot_cmd = app.add_subcommand("plot", "Box plot of execution times from an assessment report");
  plot_cmd->add_option("--report", plot_report_path, "Assessment report JSON")->required();
  plot_cmd->add_option("--out", plot_out, "Output prefix for .svg and .csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*map_cmd) {
      std::string text;
      const auto s = load_scenario(map_scenario_path, &text);
      PipelineConfig cfg;
      cfg.master_seed = map_seed;
      cfg.build_map = true;
      cfg.mapping = map_opts;
      std::mt19937_64 rng(derive_seed(map_seed, "map"));
      const auto grid = map_scenario(s, map_opts, rng);
      emit(map_out, csv_provenance(stage_provenance(cfg, text)) + grid_to_csv(grid));
    } else if (*gen_cmd) {
      std::string text;
      auto s = load_scenario(gen_scenario_path, &text);
      PipelineConfig cfg;
      cfg.master_seed = gen_seed;
      cfg.build_map = true;
      cfg.mapping = gen_opts;
      std::mt19937_64 rng(derive_seed(gen_seed, "map"));
      const auto grid = map_scenario(s, gen_opts, rng);
      s = apply_extraction(std::move(s), extract_problem(grid, s, gen_opts.extraction));
      emit(gen_out, csv_provenance(stage_provenance(cfg, text)) + write_scenario(s));
    } else if (*plan_cmd) {
      std::string text;
      const auto s = load_scenario(plan_scenario_path, &text);
      PipelineConfig cfg;
      cfg.master_seed = plan_seed;
      cfg.candidates = plan_opts;
      cfg.grounding.collision = plan_collision == "absorbing" ? CollisionModel::Absorbing : CollisionModel::Restart;
      const auto prov = stage_provenance(cfg, text);
      const auto grounded = ground_to_mdp(s, cfg.grounding);
      std::mt19937_64 rng(derive_seed(plan_seed, "gamma"));
      const auto set = generate_candidates(grounded.mdp, plan_opts, rng);
      json index = json::array();
      for (const auto& c : set.candidates) {
        auto file = make_plan_file(c.plan);
        file.provenance = prov;
        if (plan_timings) file.planning_time_s = c.planning_time_s;
        const auto path = fs::path(plan_out) / (c.plan.id + ".json");
        write_file(path, write_plan_file(file));
        index.push_back({{"plan_id", c.plan.id}, {"gammas", c.gammas}, {"plan", path.filename().string()}});
        std::cout << fmt::format("{}  gamma={:.4f}  {}\n", c.plan.id, c.plan.gamma, fmt::join(c.plan.linearization, " -> "));
      }
      write_file(fs::path(plan_out) / "index.json",
                 json{{"format_version", kFormatVersion}, {"provenance", to_json(prov)}, {"plans", index}}.dump(2) + "\n");
    } else if (*refine_cmd) {
      std::string text, plan_text;
      const auto s = load_scenario(refine_scenario_path, &text);
      const auto plan = load_plan(refine_plan, plan_text);
      PipelineConfig cfg;
      cfg.master_seed = plan.provenance ? plan.provenance->master_seed : 0;
      cfg.refine = refine_opts;
      const auto traj = refine(s, steps_from_actions(plan.actions), refine_opts, plan.plan_id);
      emit(refine_out, csv_provenance(stage_provenance(cfg, text + plan_text)) + trajectory_to_csv(traj));
    } else if (*sim_cmd) {
      std::string text, plan_text;
      const auto s = load_scenario(sim_scenario_path, &text);
      const auto plan = load_plan(sim_plan, plan_text);
      PipelineConfig cfg;
      cfg.master_seed = sim_seed;
      cfg.refine = sim_refine;
      cfg.disturbance = sim_disturbance;
      cfg.episodes = sim_episodes;
      const auto traj = refine(s, steps_from_actions(plan.actions), sim_refine, plan.plan_id);
      const auto records = run_batch(traj, s, sim_disturbance, sim_episodes, sim_seed, sim_threads);
      emit(sim_out, episodes_to_jsonl(records, stage_provenance(cfg, text + plan_text)));
    } else if (*assess_cmd) {
      std::vector<PlanAssessment> plans;
      std::optional<std::uint64_t> seed;
      std::string logs;
      for (const auto& path : assess_logs) {
        PlanAssessment pa;
        const auto log = read_file(path);
        logs += log;
        pa.episodes = episodes_from_jsonl(log);
        if (pa.episodes.empty()) throw InputError(fmt::format("'{}' holds no episodes", path));
        pa.candidate.plan.id = pa.episodes.front().plan_id;
        pa.trajectory.plan_id = pa.candidate.plan.id;
        seed = pa.episodes.front().seed.master;
        for (const auto& e : pa.episodes) pa.samples.push_back(e.execution_time);
        plans.push_back(std::move(pa));
      }
      PipelineConfig cfg;
      cfg.master_seed = seed.value_or(0);
      cfg.metrics = assess_metrics;
      cfg.alpha_mean = assess_alpha_mean;
      const auto report = assess_plans(plans, assess_metrics, assess_alpha_mean, stage_provenance(cfg, logs));
      emit(assess_out, to_json(report).dump(2) + "\n");
    } else if (*select_cmd) {
      const auto table = load_metric_table(load_json(select_in));
      std::cout << to_json(select_plan(table, select_alpha_mean)).dump(2) << "\n";
    } else if (*pipe_cmd) {
      if (!pipe_config.empty()) pipe = pipeline_config_from_json(load_json(pipe_config), pipe);
      if (pipe_scenario) pipe.scenario_path = *pipe_scenario;
      if (pipe_seed) pipe.master_seed = *pipe_seed;
      if (pipe_out) pipe.output_dir = *pipe_out;
      if (pipe_samples) pipe.candidates.samples = *pipe_samples;
      if (pipe_gmin) pipe.candidates.gamma_min = *pipe_gmin;
      if (pipe_gmax) pipe.candidates.gamma_max = *pipe_gmax;
      if (pipe_episodes) pipe.episodes = *pipe_episodes;
      if (pipe_alpha_mean) pipe.alpha_mean = *pipe_alpha_mean;
      if (pipe_threads) pipe.threads = *pipe_threads;
      if (pipe_timings) pipe.record_timings = true;
      if (pipe_map) pipe.build_map = true;
      const bool seed_in_config = !pipe_config.empty() && load_json(pipe_config).contains("seed");
      if (!pipe_seed && !seed_in_config) throw InputError("--seed is required (on the command line or in --config)");
      if (pipe.scenario_path.empty()) throw InputError("--scenario is required (on the command line or in --config)");
      if (pipe_dump) {
        std::cout << to_json(pipe).dump(2) << "\n";
        return 0;
      }
      const auto outcome = run_pipeline(pipe);
      if (outcome.exit_code != 0) {
        std::cerr << read_file(fs::path(pipe.output_dir) / "error.json");
        return outcome.exit_code;
      }
      std::cout << outcome.summary;
    } else if (*scale_cmd) {
      const auto depths = parse_list(scale_depths, "depth");
      const auto criticals = parse_list(scale_criticals, "critical count");
      if (depths.empty() || criticals.empty()) throw InputError("depth and critical lists must be nonempty");
      if (depths.size() != criticals.size() && depths.size() != 1 && criticals.size() != 1)
        throw InputError("depth and critical lists must have equal length, or one of them a single entry");
      const std::size_t n = std::max(depths.size(), criticals.size());
      std::vector<std::pair<std::size_t, std::size_t>> cases;
      for (std::size_t i = 0; i < n; ++i)
        cases.emplace_back(depths[depths.size() == 1 ? 0 : i], criticals[criticals.size() == 1 ? 0 : i]);
      const auto rows = run_scaling(cases, scale_opts, scale_seed);
      PipelineConfig cfg;
      cfg.master_seed = scale_seed;
      cfg.candidates = scale_opts.candidates;
      cfg.grounding = scale_opts.grounding;
      const auto cases_text = json{{"cases", cases}, {"repeats", scale_opts.repeats}, {"histories", scale_opts.histories}};
      emit(scale_out, csv_provenance(stage_provenance(cfg, cases_text.dump())) + scaling_csv(rows));
      const bool any = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.solved; });
      for (const auto& r : rows)
        if (!r.solved) std::cerr << fmt::format("depth {} criticals {}: {}\n", r.depth, r.criticals, r.error);
      if (!any) return 1;
    } else if (*plot_cmd) {
      const auto report = assessment_report_from_json(load_json(plot_report_path));
      const auto out = plot_report(report);
      write_file(plot_out + ".svg", out.svg);
      write_file(plot_out + ".csv", out.csv);
      for (const auto& id : out.skipped) std::cerr << fmt::format("warning: {} skipped, fewer than 2 samples\n", id);
    }
  } catch (const std::exception& e) {
    return report_failure(command, e);
  }
  return 0;
}
