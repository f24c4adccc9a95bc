#include "riskplan/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "riskplan/errors.hpp"

namespace riskplan {

using nlohmann::json;
namespace fs = std::filesystem;

VoxelGrid map_scenario(const Scenario& s, const MappingOptions& opts, std::mt19937_64& rng) {
  if (s.waypoints.empty()) throw InvalidArgument("cannot map a scenario without waypoints");
  if (opts.headings == 0 || opts.beams == 0 || opts.elevations.empty())
    throw InvalidArgument("mapping needs at least one heading, beam and elevation");
  Eigen::Vector3d lo = s.waypoints.front().position, hi = lo;
  for (const auto& w : s.waypoints) {
    lo = lo.cwiseMin(w.position);
    hi = hi.cwiseMax(w.position);
  }
  for (const auto& o : s.obstacles) {
    lo = lo.cwiseMin(o.center - o.half_extents);
    hi = hi.cwiseMax(o.center + o.half_extents);
  }
  const Eigen::Vector3d pad = Eigen::Vector3d::Constant(opts.margin);
  auto grid = VoxelGrid::covering(lo - pad, hi + pad, opts.resolution);

  std::vector<Eigen::Isometry3d> poses;
  for (const auto& w : s.waypoints) {
    for (std::size_t h = 0; h < opts.headings; ++h) {
      const double yaw = 2.0 * std::numbers::pi * static_cast<double>(h) / static_cast<double>(opts.headings);
      for (double elevation : opts.elevations) {
        Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
        pose.translate(w.position);
        pose.rotate(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                    Eigen::AngleAxisd(-elevation, Eigen::Vector3d::UnitY()));
        poses.push_back(pose);
      }
    }
  }
  const auto fan = BeamFan::horizontal(opts.beams, opts.aperture, opts.max_range);
  for (const auto& scan : synthesize_scans(s.obstacles, poses, fan, rng, opts.range_sigma))
    integrate_scan(grid, scan, opts.sensor);
  return grid;
}

namespace {

std::string collision_name(CollisionModel m) { return m == CollisionModel::Restart ? "restart" : "absorbing"; }

json refine_json(const RefineOptions& r) {
  return {{"dt", r.dt},
          {"a_max", r.a_max},
          {"helix_points", r.helix_points},
          {"helix_clearance", r.helix_clearance},
          {"helix_turns", r.helix_turns},
          {"arc_step", r.arc_step}};
}

json mapping_json(const MappingOptions& m) {
  return {{"resolution", m.resolution},   {"margin", m.margin},
          {"beams", m.beams},             {"aperture", m.aperture},
          {"headings", m.headings},       {"elevations", m.elevations},
          {"max_range", m.max_range},     {"range_sigma", m.range_sigma},
          {"p_hit", m.sensor.p_hit},      {"p_miss", m.sensor.p_miss},
          {"tau_occ", m.extraction.tau_occ}, {"clearance", m.extraction.clearance},
          {"kappa", m.extraction.kappa},  {"max_probability", m.extraction.max_probability}};
}

json metric_json(const MetricConfig& m) {
  return {{"bin_width", m.bin_width}, {"alpha", m.alpha}, {"time_bound", m.time_bound}};
}

MetricConfig metric_config_from_json(const json& j, const std::string& path, MetricConfig m) {
  using namespace schema;
  expect_keys(j, path, {}, {"bin_width", "alpha", "time_bound"});
  if (j.contains("bin_width")) m.bin_width = number(j["bin_width"], path + ".bin_width");
  if (j.contains("alpha")) m.alpha = number(j["alpha"], path + ".alpha");
  if (j.contains("time_bound")) m.time_bound = number(j["time_bound"], path + ".time_bound");
  return m;
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void validate(const PipelineConfig& c) {
  const auto& g = c.candidates;
  if (c.candidates.samples < 1) throw InvalidArgument("gamma sample count must be at least 1");
  if (!(g.gamma_min > 0.0 && g.gamma_min < g.gamma_max && g.gamma_max <= 1.0))
    throw InvalidArgument(fmt::format("gamma interval [{}, {}) must lie in (0,1)", g.gamma_min, g.gamma_max));
  if (c.episodes < 1) throw InvalidArgument("episode count must be at least 1");
  if (!(c.alpha_mean >= 0.0)) throw InvalidArgument("alpha_mean must be non-negative");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> summary_row(const AssessmentReport::PlanEntry& p, const std::optional<double>& time) {
  std::vector<std::string> row{p.plan_id, join(p.actions, " -> "), time ? fmt::format("{:.3f}", *time) : "-",
                               std::to_string(p.high_level_length), fmt::format("{:.2f}", p.low_level_length)};
  if (p.metrics) {
    row.push_back(fmt::format("{:.2f}", p.metrics->mean));
    row.push_back(fmt::format("{:.4f}", p.metrics->variance));
    row.push_back(fmt::format("{:.2f}", p.metrics->entropy_bits));
  } else {
    row.insert(row.end(), {"-", "-", "-"});
  }
  return row;
}

json error_json(const std::string& stage, const std::exception& e, int code) {
  json j{{"format_version", kFormatVersion}, {"stage", stage}, {"exit_code", code}, {"message", e.what()}};
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    j["error"] = err->code();
    if (const auto* sm = dynamic_cast<const SchemaMismatch*>(err)) j["path"] = sm->path();
    if (const auto* nc = dynamic_cast<const NonConvergence*>(err)) j["witness"] = nc->witness();
  } else {
    j["error"] = "Internal";
  }
  return j;
}

}  // namespace

json to_json(const PipelineConfig& c) {
  return {{"scenario", c.scenario_path},
          {"seed", c.master_seed},
          {"gamma_samples", c.candidates.samples},
          {"gamma_min", c.candidates.gamma_min},
          {"gamma_max", c.candidates.gamma_max},
          {"episodes", c.episodes},
          {"disturbance", to_json(c.disturbance)},
          {"metrics", metric_json(c.metrics)},
          {"alpha_mean", c.alpha_mean},
          {"collision", collision_name(c.grounding.collision)},
          {"restart_cost", c.grounding.restart_cost},
          {"refine", refine_json(c.refine)},
          {"build_map", c.build_map},
          {"mapping", mapping_json(c.mapping)},
          {"output_dir", c.output_dir},
          {"threads", c.threads},
          {"timings", c.record_timings}};
}

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig c) {
  using namespace schema;
  expect_keys(j, "", {},
              {"scenario", "seed", "gamma_samples", "gamma_min", "gamma_max", "episodes", "disturbance", "metrics",
               "alpha_mean", "collision", "restart_cost", "refine", "build_map", "mapping", "output_dir", "threads",
               "timings"});
  auto num = [](const json& obj, const std::string& path, const char* key, double& out) {
    if (obj.contains(key)) out = number(obj[key], path + "." + key);
  };
  auto count = [](const json& obj, const std::string& path, const char* key, std::size_t& out) {
    if (obj.contains(key)) out = static_cast<std::size_t>(unsigned_integer(obj[key], path + "." + key));
  };
  if (j.contains("scenario")) c.scenario_path = string(j["scenario"], ".scenario");
  if (j.contains("seed")) c.master_seed = unsigned_integer(j["seed"], ".seed");
  count(j, "", "gamma_samples", c.candidates.samples);
  num(j, "", "gamma_min", c.candidates.gamma_min);
  num(j, "", "gamma_max", c.candidates.gamma_max);
  count(j, "", "episodes", c.episodes);
  if (j.contains("disturbance")) {
    // Fields missing from the object keep their current values.
    json merged = to_json(c.disturbance);
    expect_object(j["disturbance"], ".disturbance");
    for (const auto& [k, v] : j["disturbance"].items()) merged[k] = v;
    c.disturbance = disturbance_from_json(merged, ".disturbance");
  }
  if (j.contains("metrics")) c.metrics = metric_config_from_json(j["metrics"], ".metrics", c.metrics);
  num(j, "", "alpha_mean", c.alpha_mean);
  if (j.contains("collision")) {
    const auto name = string(j["collision"], ".collision");
    if (name == "restart") {
      c.grounding.collision = CollisionModel::Restart;
    } else if (name == "absorbing") {
      c.grounding.collision = CollisionModel::Absorbing;
    } else {
      throw SchemaMismatch(".collision", "expected \"restart\" or \"absorbing\"");
    }
  }
  num(j, "", "restart_cost", c.grounding.restart_cost);
  if (j.contains("refine")) {
    const auto& r = j["refine"];
    expect_keys(r, ".refine", {}, {"dt", "a_max", "helix_points", "helix_clearance", "helix_turns", "arc_step"});
    num(r, ".refine", "dt", c.refine.dt);
    num(r, ".refine", "a_max", c.refine.a_max);
    count(r, ".refine", "helix_points", c.refine.helix_points);
    num(r, ".refine", "helix_clearance", c.refine.helix_clearance);
    num(r, ".refine", "helix_turns", c.refine.helix_turns);
    num(r, ".refine", "arc_step", c.refine.arc_step);
  }
  if (j.contains("build_map")) c.build_map = boolean(j["build_map"], ".build_map");
  if (j.contains("mapping")) {
    const auto& m = j["mapping"];
    const std::string p = ".mapping";
    expect_keys(m, p, {},
                {"resolution", "margin", "beams", "aperture", "headings", "elevations", "max_range", "range_sigma",
                 "p_hit", "p_miss", "tau_occ", "clearance", "kappa", "max_probability"});
    auto& o = c.mapping;
    num(m, p, "resolution", o.resolution);
    num(m, p, "margin", o.margin);
    count(m, p, "beams", o.beams);
    num(m, p, "aperture", o.aperture);
    count(m, p, "headings", o.headings);
    if (m.contains("elevations")) {
      const auto& e = array(m["elevations"], p + ".elevations");
      o.elevations.clear();
      for (std::size_t i = 0; i < e.size(); ++i)
        o.elevations.push_back(number(e[i], fmt::format("{}.elevations[{}]", p, i)));
    }
    num(m, p, "max_range", o.max_range);
    num(m, p, "range_sigma", o.range_sigma);
    num(m, p, "p_hit", o.sensor.p_hit);
    num(m, p, "p_miss", o.sensor.p_miss);
    num(m, p, "tau_occ", o.extraction.tau_occ);
    num(m, p, "clearance", o.extraction.clearance);
    num(m, p, "kappa", o.extraction.kappa);
    num(m, p, "max_probability", o.extraction.max_probability);
  }
  if (j.contains("output_dir")) c.output_dir = string(j["output_dir"], ".output_dir");
  if (j.contains("threads")) c.threads = static_cast<unsigned>(unsigned_integer(j["threads"], ".threads"));
  if (j.contains("timings")) c.record_timings = boolean(j["timings"], ".timings");
  return c;
}

std::string config_hash(const PipelineConfig& c, const std::string& scenario_text) {
  auto j = to_json(c);
  j.erase("scenario");
  j.erase("output_dir");
  j.erase("threads");
  return fmt::format("{:016x}", fnv1a(scenario_text, fnv1a(j.dump())));
}

json to_json(const AssessmentReport& r) {
  json plans = json::array();
  for (const auto& p : r.plans) {
    plans.push_back({{"plan_id", p.plan_id},
                     {"gamma", p.gamma},
                     {"gammas", p.gammas},
                     {"actions", p.actions},
                     {"high_level_length", p.high_level_length},
                     {"low_level_length", p.low_level_length},
                     {"nominal_duration", p.nominal_duration},
                     {"samples", p.samples},
                     {"incidents", p.incidents},
                     {"completed", p.completed},
                     {"metrics", p.metrics ? to_json(*p.metrics) : json(nullptr)}});
  }
  json comparisons = json::array();
  for (const auto& c : r.comparisons) {
    auto w = to_json(c.welch);
    w["plan_id"] = c.plan_id;
    comparisons.push_back(std::move(w));
  }
  return {{"format_version", kFormatVersion},
          {"provenance", to_json(r.provenance)},
          {"metric_config", metric_json(r.metric_config)},
          {"alpha_mean", r.alpha_mean},
          {"plans", std::move(plans)},
          {"selection", to_json(r.selection)},
          {"comparisons", std::move(comparisons)}};
}

AssessmentReport assessment_report_from_json(const json& j) {
  using namespace schema;
  expect_keys(j, "",
              {"format_version", "provenance", "metric_config", "alpha_mean", "plans", "selection", "comparisons"});
  if (unsigned_integer(j["format_version"], ".format_version") != kFormatVersion)
    throw SchemaMismatch(".format_version", "unsupported format version");
  AssessmentReport r;
  r.provenance = provenance_from_json(j["provenance"], ".provenance");
  expect_keys(j["metric_config"], ".metric_config", {"bin_width", "alpha", "time_bound"});
  r.metric_config = metric_config_from_json(j["metric_config"], ".metric_config", {});
  r.alpha_mean = number(j["alpha_mean"], ".alpha_mean");

  const auto& plans = array(j["plans"], ".plans");
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto path = fmt::format(".plans[{}]", i);
    const auto& p = plans[i];
    expect_keys(p, path,
                {"plan_id", "gamma", "gammas", "actions", "high_level_length", "low_level_length", "nominal_duration",
                 "samples", "incidents", "completed", "metrics"});
    AssessmentReport::PlanEntry e;
    e.plan_id = string(p["plan_id"], path + ".plan_id");
    e.gamma = number(p["gamma"], path + ".gamma");
    const auto& gammas = array(p["gammas"], path + ".gammas");
    for (std::size_t k = 0; k < gammas.size(); ++k)
      e.gammas.push_back(number(gammas[k], fmt::format("{}.gammas[{}]", path, k)));
    const auto& actions = array(p["actions"], path + ".actions");
    for (std::size_t k = 0; k < actions.size(); ++k)
      e.actions.push_back(string(actions[k], fmt::format("{}.actions[{}]", path, k)));
    e.high_level_length = unsigned_integer(p["high_level_length"], path + ".high_level_length");
    e.low_level_length = number(p["low_level_length"], path + ".low_level_length");
    e.nominal_duration = number(p["nominal_duration"], path + ".nominal_duration");
    const auto& samples = array(p["samples"], path + ".samples");
    for (std::size_t k = 0; k < samples.size(); ++k)
      e.samples.push_back(number(samples[k], fmt::format("{}.samples[{}]", path, k)));
    e.incidents = unsigned_integer(p["incidents"], path + ".incidents");
    e.completed = unsigned_integer(p["completed"], path + ".completed");
    if (!p["metrics"].is_null()) e.metrics = metrics_from_json(p["metrics"], path + ".metrics");
    r.plans.push_back(std::move(e));
  }

  const auto& sel = j["selection"];
  expect_keys(sel, ".selection", {"selected", "mean_threshold", "eliminated"});
  r.selection.plan_id = string(sel["selected"], ".selection.selected");
  r.selection.mean_threshold = number(sel["mean_threshold"], ".selection.mean_threshold");
  const auto& elim = array(sel["eliminated"], ".selection.eliminated");
  for (std::size_t i = 0; i < elim.size(); ++i) {
    const auto path = fmt::format(".selection.eliminated[{}]", i);
    expect_keys(elim[i], path, {"plan_id", "reason"});
    r.selection.eliminated.push_back(
        {string(elim[i]["plan_id"], path + ".plan_id"), string(elim[i]["reason"], path + ".reason")});
  }

  const auto& comps = array(j["comparisons"], ".comparisons");
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const auto path = fmt::format(".comparisons[{}]", i);
    const auto& c = comps[i];
    expect_keys(c, path, {"plan_id", "t", "dof", "p_value"});
    AssessmentReport::Comparison comp;
    comp.plan_id = string(c["plan_id"], path + ".plan_id");
    comp.welch.dof = number(c["dof"], path + ".dof");
    comp.welch.p_value = number(c["p_value"], path + ".p_value");
    if (c["t"] == "+inf" || c["t"] == "-inf") {
      comp.welch.t = (c["t"] == "+inf" ? 1.0 : -1.0) * std::numeric_limits<double>::infinity();
    } else {
      comp.welch.t = number(c["t"], path + ".t");
    }
    r.comparisons.push_back(std::move(comp));
  }
  return r;
}

AssessmentReport assess_plans(const std::vector<PlanAssessment>& plans, const MetricConfig& cfg, double alpha_mean,
                              const Provenance& provenance) {
  AssessmentReport r;
  r.provenance = provenance;
  r.metric_config = cfg;
  r.alpha_mean = alpha_mean;
  std::vector<PlanMetrics> table;
  for (const auto& p : plans) {
    AssessmentReport::PlanEntry e;
    e.plan_id = p.candidate.plan.id;
    e.gamma = p.candidate.plan.gamma;
    e.gammas = p.candidate.gammas;
    e.actions = p.candidate.plan.linearization;
    e.high_level_length = e.actions.size();
    e.low_level_length = low_level_length(p.trajectory);
    e.nominal_duration = p.trajectory.duration;
    e.samples = p.samples;
    for (const auto& ep : p.episodes) {
      e.incidents += ep.incidents.size();
      e.completed += ep.completed ? 1 : 0;
    }
    if (p.samples.size() >= 2) {
      e.metrics = compute_metrics(p.samples, cfg);
      table.push_back({e.plan_id, *e.metrics});
    }
    r.plans.push_back(std::move(e));
  }
  if (table.empty()) throw InsufficientSamples(plans.empty() ? 0 : plans.front().samples.size());
  r.selection = select_plan(table, alpha_mean);

  const auto winner = std::find_if(r.plans.begin(), r.plans.end(),
                                   [&](const auto& e) { return e.plan_id == r.selection.plan_id; });
  for (const auto& e : r.plans) {
    if (&e == &*winner || !e.metrics) continue;
    r.comparisons.push_back({e.plan_id, compare_means(winner->samples, e.samples)});
  }
  return r;
}

std::string csv_provenance(const Provenance& p) {
  return fmt::format("# config_hash={} master_seed={}\n", p.config_hash, p.master_seed);
}

std::string summary_csv(const AssessmentReport& r, const std::vector<std::optional<double>>& planning_times,
                        const Provenance& provenance) {
  std::string out = csv_provenance(provenance);
  std::vector<std::string> header;
  for (const auto& c : kSummaryColumns) header.push_back(csv_field(c));
  out += join(header, ",") + "\n";
  for (std::size_t i = 0; i < r.plans.size(); ++i) {
    auto row = summary_row(r.plans[i], i < planning_times.size() ? planning_times[i] : std::nullopt);
    for (auto& f : row) f = csv_field(f);
    out += join(row, ",") + "\n";
  }
  return out;
}

std::string summary_text(const AssessmentReport& r, const std::vector<std::optional<double>>& planning_times) {
  std::vector<std::vector<std::string>> rows{kSummaryColumns};
  for (std::size_t i = 0; i < r.plans.size(); ++i)
    rows.push_back(summary_row(r.plans[i], i < planning_times.size() ? planning_times[i] : std::nullopt));
  std::vector<std::size_t> width(kSummaryColumns.size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      if (c) out += "  ";
      // Text columns align left, numeric ones right.
      out += c < 2 ? fmt::format("{:<{}}", rows[i][c], width[c]) : fmt::format("{:>{}}", rows[i][c], width[c]);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += "\n";
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
    }
  }
  out += fmt::format("\nselected: {}\n", r.selection.plan_id);
  for (const auto& e : r.selection.eliminated) out += fmt::format("  {}: {}\n", e.plan_id, e.reason);
  return out;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const SchemaMismatch*>(&e) || dynamic_cast<const InvalidArgument*>(&e) ||
      dynamic_cast<const UngroundableGoal*>(&e) || dynamic_cast<const NoProperPolicy*>(&e) ||
      dynamic_cast<const GammaOutOfRange*>(&e) || dynamic_cast<const WaypointInOccupiedVoxel*>(&e) ||
      dynamic_cast<const InsufficientSamples*>(&e) || dynamic_cast<const EmptyReport*>(&e) ||
      dynamic_cast<const nlohmann::json::exception*>(&e))
    return 2;
  return 1;
}

void write_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument(fmt::format("cannot write '{}'", path.string()));
  out << contents;
  if (!out) throw InvalidArgument(fmt::format("failed writing '{}'", path.string()));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineOutcome run_pipeline(const PipelineConfig& cfg) {
  PipelineOutcome outcome;
  const fs::path dir(cfg.output_dir);
  std::string stage = "config";
  Provenance prov{"", cfg.master_seed};

  auto fail = [&](json report, int code) {
    report["provenance"] = to_json(prov);
    try {
      write_file(dir / "error.json", report.dump(2) + "\n");
    } catch (const std::exception&) {
      // The exit code still reports the failure.
    }
    outcome.exit_code = code;
    return outcome;
  };

  try {
    validate(cfg);
    stage = "parse";
    const auto text = read_file(cfg.scenario_path);
    prov.config_hash = config_hash(cfg, text);
    auto parsed = parse_scenario(text);
    if (!parsed.ok()) {
      json diags = json::array();
      for (const auto& d : parsed.diagnostics)
        diags.push_back({{"kind", d.kind}, {"line", d.line}, {"column", d.column}, {"message", d.message}});
      return fail({{"format_version", kFormatVersion},
                   {"stage", stage},
                   {"exit_code", 2},
                   {"error", "ParseError"},
                   {"message", fmt::format("{} error(s) in '{}'", parsed.diagnostics.size(), cfg.scenario_path)},
                   {"diagnostics", std::move(diags)}},
                  2);
    }
    Scenario scenario = std::move(*parsed.scenario);
    fs::create_directories(dir);

    if (cfg.build_map) {
      stage = "map";
      std::mt19937_64 rng(derive_seed(cfg.master_seed, "map"));
      const auto grid = map_scenario(scenario, cfg.mapping, rng);
      write_file(dir / "map.csv", csv_provenance(prov) + grid_to_csv(grid));
      stage = "extract";
      scenario = apply_extraction(std::move(scenario), extract_problem(grid, scenario, cfg.mapping.extraction));
      write_file(dir / "scenario.scn", csv_provenance(prov) + write_scenario(scenario));
    }

    stage = "ground";
    const auto grounded = ground_to_mdp(scenario, cfg.grounding);

    stage = "plan";
    std::mt19937_64 gamma_rng(derive_seed(cfg.master_seed, "gamma"));
    auto set = generate_candidates(grounded.mdp, cfg.candidates, gamma_rng);

    json index_plans = json::array();
    json timings_plans = json::array();
    std::vector<std::optional<double>> times;
    for (auto& cand : set.candidates) {
      const auto& id = cand.plan.id;
      stage = "refine " + id;
      PlanAssessment pa;
      pa.trajectory = refine(scenario, steps_from_actions(cand.plan.linearization), cfg.refine, id);
      stage = "simulate " + id;
      pa.episodes = run_batch(pa.trajectory, scenario, cfg.disturbance, cfg.episodes, cfg.master_seed, cfg.threads);
      for (const auto& e : pa.episodes) pa.samples.push_back(e.execution_time);

      const auto plan_path = fs::path("plans") / (id + ".json");
      const auto traj_path = fs::path("trajectories") / (id + ".csv");
      const auto episode_path = fs::path("episodes") / (id + ".jsonl");
      auto file = make_plan_file(cand.plan);
      file.trajectory = traj_path.generic_string();
      file.provenance = prov;
      if (cfg.record_timings) file.planning_time_s = cand.planning_time_s;
      write_file(dir / plan_path, write_plan_file(file));
      write_file(dir / traj_path, csv_provenance(prov) + trajectory_to_csv(pa.trajectory));
      write_file(dir / episode_path, episodes_to_jsonl(pa.episodes, prov));

      index_plans.push_back({{"plan_id", id},
                             {"gammas", cand.gammas},
                             {"plan", plan_path.generic_string()},
                             {"trajectory", traj_path.generic_string()},
                             {"episodes", episode_path.generic_string()}});
      timings_plans.push_back({{"plan_id", id}, {"planning_time_s", cand.planning_time_s}});
      times.push_back(cfg.record_timings ? std::optional<double>(cand.planning_time_s) : std::nullopt);
      pa.candidate = std::move(cand);
      outcome.plans.push_back(std::move(pa));
    }

    stage = "assess";
    auto report = assess_plans(outcome.plans, cfg.metrics, cfg.alpha_mean, prov);
    write_file(dir / "report.json", to_json(report).dump(2) + "\n");
    write_file(dir / "summary.csv", summary_csv(report, times, prov));
    outcome.summary = summary_text(report, times);
    write_file(dir / "summary.txt", "# config_hash=" + prov.config_hash +
                                         fmt::format(" master_seed={}\n", prov.master_seed) + outcome.summary);

    json samples = json::array();
    for (const auto& s : set.samples) {
      samples.push_back({{"gamma", s.gamma},
                         {"plan_id", s.candidate >= 0 ? json(outcome.plans[s.candidate].candidate.plan.id)
                                                      : json(nullptr)},
                         {"error", s.error.empty() ? json(nullptr) : json(s.error)}});
    }
    write_file(dir / "index.json", json{{"format_version", kFormatVersion},
                                        {"provenance", to_json(prov)},
                                        {"states", grounded.mdp.states.size()},
                                        {"gamma_samples", std::move(samples)},
                                        {"plans", std::move(index_plans)},
                                        {"report", "report.json"},
                                        {"summary", "summary.csv"},
                                        {"selected", report.selection.plan_id}}
                                           .dump(2) + "\n");
    write_file(dir / "timings.json",
               json{{"format_version", kFormatVersion}, {"provenance", to_json(prov)}, {"plans", timings_plans}}
                       .dump(2) + "\n");
    std::error_code ec;
    fs::remove(dir / "error.json", ec);
    outcome.report = std::move(report);
    return outcome;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    return fail(error_json(stage, e, code), code);
  }
}

}  // namespace riskplan
