#include "riskplan/scaling.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <tuple>

#include <fmt/format.h>

#include "riskplan/assessment.hpp"
#include "riskplan/errors.hpp"
#include "riskplan/simulator.hpp"

namespace riskplan {

Scenario corridor_scenario(std::size_t depth, std::size_t criticals, const CorridorOptions& opts) {
  if (depth < 3) throw InvalidArgument(fmt::format("corridor depth must be at least 3, got {}", depth));
  if (!(opts.shortcut_probability >= 0.0 && opts.shortcut_probability < 1.0))
    throw InvalidArgument("shortcut probability must lie in [0,1)");
  Scenario s;
  for (std::size_t i = 0; i <= depth; ++i) {
    Waypoint w;
    w.id = fmt::format("c{}", i);
    w.position = {static_cast<double>(i) * opts.spacing, 0.0, -5.0};
    s.waypoints.push_back(w);
  }
  for (std::size_t i = 0; i < depth; ++i) s.edges.push_back({fmt::format("c{}", i), fmt::format("c{}", i + 1), 0.0});

  const std::size_t span = depth - 3;
  for (std::size_t j = 0; j < criticals; ++j) {
    const std::size_t a = criticals > 1 ? j * span / (criticals - 1) : 0;
    // Probabilities fall linearly from the base value to a fifth of it.
    const double scale = criticals > 1 ? 1.0 - 0.8 * static_cast<double>(j) / static_cast<double>(criticals - 1) : 1.0;
    const double p = opts.shortcut_probability * scale;
    const double x = (static_cast<double>(a) + 1.5) * opts.spacing;
    const double y = opts.spacing * static_cast<double>(1 + j % 4);

    Obstacle o;
    o.label = fmt::format("rock{}", j);
    o.center = {x, y + 1.5, -5.0};
    o.half_extents = {0.5, 0.5, 1.0};
    s.obstacles.push_back(o);

    Waypoint w;
    w.id = fmt::format("k{}", j);
    w.position = {x, y, -5.0};
    w.critical = true;
    s.waypoints.push_back(w);
    s.edges.push_back({fmt::format("c{}", a), w.id, p});
    s.edges.push_back({w.id, fmt::format("c{}", a + 3), p});
  }
  s.mission.start = "c0";
  s.mission.final = fmt::format("c{}", depth);
  return s;
}

std::vector<ScalingRow> run_scaling(const std::vector<std::pair<std::size_t, std::size_t>>& cases,
                                    const ScalingOptions& opts, std::uint64_t master_seed) {
  if (cases.empty()) throw InvalidArgument("scaling needs at least one (depth, criticals) case");
  if (opts.repeats == 0 || opts.histories < 2) throw InvalidArgument("scaling needs repeats >= 1 and histories >= 2");

  struct Case {
    std::optional<GroundedProblem> grounded;
    std::string stage;
    CandidateSet set;
    std::vector<double> times;
  };
  std::vector<ScalingRow> rows(cases.size());
  std::vector<Case> work(cases.size());
  auto fail = [&](std::size_t i, const std::exception& e) {
    rows[i].error = e.what();
    work[i].grounded.reset();
  };

  for (std::size_t i = 0; i < cases.size(); ++i) {
    auto& row = rows[i];
    std::tie(row.depth, row.criticals) = cases[i];
    work[i].stage = fmt::format("scaling/{}/{}", row.depth, row.criticals);
    try {
      const auto scenario = corridor_scenario(row.depth, row.criticals, opts.corridor);
      row.waypoints = scenario.waypoints.size();
      work[i].grounded = ground_to_mdp(scenario, opts.grounding);
      row.states = work[i].grounded->mdp.states.size();
      // Untimed warm-up.
      std::mt19937_64 rng(derive_seed(master_seed, work[i].stage));
      work[i].set = generate_candidates(work[i].grounded->mdp, opts.candidates, rng);
    } catch (const std::exception& e) {
      fail(i, e);
    }
  }

  // Repeats run round-robin over the cases so that machine noise spreads
  // across all of them instead of landing on one.
  for (std::size_t r = 0; r < opts.repeats; ++r) {
    for (std::size_t i = 0; i < cases.size(); ++i) {
      if (!work[i].grounded) continue;
      std::mt19937_64 rng(derive_seed(master_seed, work[i].stage));
      const auto t0 = std::chrono::steady_clock::now();
      work[i].set = generate_candidates(work[i].grounded->mdp, opts.candidates, rng);
      work[i].times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
  }

  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!work[i].grounded) continue;
    auto& row = rows[i];
    auto& times = work[i].times;
    const auto& mdp = work[i].grounded->mdp;
    const auto& set = work[i].set;
    try {
      std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
      row.planning_time_s = times[times.size() / 2];
      row.candidates = set.candidates.size();

      std::vector<PlanMetrics> table;
      for (const auto& cand : set.candidates) {
        const auto chain = induce_chain(mdp, cand.plan);
        std::mt19937_64 rng(derive_seed(SeedTuple{master_seed, work[i].stage + "/" + cand.plan.id, 0}));
        std::vector<double> costs;
        for (std::size_t h = 0; h < opts.histories; ++h) {
          const auto sample = sample_history(chain, mdp.goals, rng, 1'000'000);
          if (!sample.reached_goal) throw ImproperPolicy(cand.plan.id + " did not reach the goal");
          costs.push_back(sample.cost);
        }
        table.push_back({cand.plan.id, compute_metrics(costs)});
      }
      const auto sel = select_plan(table, opts.alpha_mean);
      const auto& chosen = *std::find_if(set.candidates.begin(), set.candidates.end(),
                                         [&](const auto& c) { return c.plan.id == sel.plan_id; });
      row.plan_id = sel.plan_id;
      row.plan_length = chosen.plan.linearization.size();
      row.gamma = chosen.plan.gamma;
      row.solved = true;
    } catch (const std::exception& e) {
      fail(i, e);
    }
  }
  return rows;
}

nlohmann::json to_json(const ScalingRow& r) {
  return {{"depth", r.depth},
          {"criticals", r.criticals},
          {"waypoints", r.waypoints},
          {"states", r.states},
          {"solved", r.solved},
          {"candidates", r.candidates},
          {"plan_id", r.plan_id},
          {"plan_length", r.plan_length},
          {"gamma", r.gamma},
          {"planning_time_s", r.planning_time_s},
          {"error", r.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.error)}};
}

std::string scaling_csv(const std::vector<ScalingRow>& rows) {
  std::string out = "depth,criticals,waypoints,states,solved,candidates,plan,plan length,gamma,planning time [s]\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{:.4f},{:.6f}\n", r.depth, r.criticals, r.waypoints, r.states,
                       r.solved ? "yes" : "no", r.candidates, r.solved ? r.plan_id : "-", r.plan_length, r.gamma,
                       r.planning_time_s);
  }
  return out;
}

}  // namespace riskplan
