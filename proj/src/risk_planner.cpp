#include "riskplan/risk_planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <exception>
#include <limits>

#include <fmt/format.h>

#include "riskplan/errors.hpp"

namespace riskplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieTolerance = 1e-9;

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw GammaOutOfRange(gamma);
}

bool all_inside(const ActionOutcomes& ao, const std::vector<bool>& set) {
  for (const auto& o : ao.outcomes)
    if (o.probability > 0.0 && !set[o.target]) return false;
  return true;
}

std::map<StateId, ActionId> restrict_to_reachable(const Mdp& m, const SuccessorIndex& index,
                                                  const std::vector<ActionId>& greedy,
                                                  const std::vector<bool>& has_action) {
  std::map<StateId, ActionId> policy;
  std::vector<bool> seen(m.states.size(), false);
  std::deque<StateId> queue{m.start};
  seen[m.start] = true;
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    if (m.is_goal(s) || !has_action[s]) continue;
    policy[s] = greedy[s];
    for (const auto& o : index.find(s, greedy[s])->outcomes) {
      if (o.probability > 0.0 && !seen[o.target]) {
        seen[o.target] = true;
        queue.push_back(o.target);
      }
    }
  }
  return policy;
}

}  // namespace

TransformedModel transform(const Mdp& m, double gamma) {
  check_gamma(gamma);
  TransformedModel out;
  out.states = m.states;
  out.actions = m.actions;
  out.start = m.start;
  out.goals = m.goals;
  out.gamma = gamma;
  out.transitions.reserve(m.transitions.size());
  for (const auto& t : m.transitions) {
    const double weight = -std::pow(gamma, m.states[t.source].cost);
    out.transitions.push_back({t.source, t.action, t.target, t.probability * weight});
  }
  return out;
}

std::vector<bool> almost_sure_goal_states(const Mdp& m, const SuccessorIndex& index) {
  const std::size_t n = m.states.size();
  std::vector<bool> inside(n, true);
  for (;;) {
    // Backward search from the goals through actions that never leave `inside`.
    std::vector<bool> next(n, false);
    for (StateId g : m.goals) next[g] = true;
    bool grew = true;
    while (grew) {
      grew = false;
      for (StateId s = 0; s < n; ++s) {
        if (next[s] || !inside[s]) continue;
        for (const auto& ao : index.actions(s)) {
          if (!all_inside(ao, inside)) continue;
          const bool hits = std::any_of(ao.outcomes.begin(), ao.outcomes.end(), [&](const Outcome& o) {
            return o.probability > 0.0 && next[o.target];
          });
          if (hits) {
            next[s] = true;
            grew = true;
            break;
          }
        }
      }
    }
    if (next == inside) return inside;
    inside = std::move(next);
  }
}

Solution solve(const Mdp& m, double gamma, const SolveOptions& opts) {
  check_gamma(gamma);
  const SuccessorIndex index(m);
  const std::size_t n = m.states.size();
  const auto proper = almost_sure_goal_states(m, index);
  if (!proper[m.start])
    throw NoProperPolicy(fmt::format("no policy reaches a goal with probability one from state {} ('{}')",
                                     m.start, m.states[m.start].label));

  // Per-step disutility factor (1/gamma)^R(s).
  std::vector<double> factor(n);
  for (StateId s = 0; s < n; ++s) factor[s] = std::pow(gamma, -m.states[s].cost);

  Solution sol;
  sol.values.gamma = gamma;
  auto& value = sol.values.value;
  value.assign(n, kInf);
  std::vector<StateId> work;
  for (StateId s = 0; s < n; ++s) {
    if (m.is_goal(s)) {
      value[s] = 1.0;
    } else if (proper[s]) {
      value[s] = 1.0;
      work.push_back(s);
    }
  }

  auto q_value = [&](StateId s, const ActionOutcomes& ao) {
    double q = 0.0;
    for (const auto& o : ao.outcomes) q += o.probability * value[o.target];
    return factor[s] * q;
  };

  bool converged = work.empty();
  for (std::size_t sweep = 0; sweep < opts.max_sweeps && !converged; ++sweep) {
    double delta = 0.0;
    for (StateId s : work) {
      double best = kInf;
      for (const auto& ao : index.actions(s))
        if (all_inside(ao, proper)) best = std::min(best, q_value(s, ao));
      // An overflowed value is unbounded and stays infinite.
      if (std::isinf(best)) {
        value[s] = best;
        continue;
      }
      delta = std::max(delta, std::abs(best - value[s]) / std::max(1.0, best));
      value[s] = best;
    }
    sol.sweeps = sweep + 1;
    converged = delta <= opts.tolerance;
  }
  if (!converged)
    throw NonConvergence(fmt::format("risk-sensitive value iteration did not converge in {} sweeps",
                                     opts.max_sweeps));
  if (!std::isfinite(value[m.start]))
    throw NoProperPolicy(fmt::format("every proper policy has unbounded disutility at gamma {} from state {} ('{}')",
                                     gamma, m.start, m.states[m.start].label));

  std::vector<ActionId> greedy(n, 0);
  std::vector<bool> has_action(n, false);
  for (StateId s : work) {
    double best = kInf;
    for (const auto& ao : index.actions(s)) {
      if (!all_inside(ao, proper)) continue;
      const double q = q_value(s, ao);
      // Actions are visited in increasing id order, so only a clear
      // improvement displaces the current choice.
      if (!has_action[s] || q < best - kTieTolerance * std::max(1.0, best)) {
        best = q;
        greedy[s] = ao.action;
        has_action[s] = true;
      }
    }
  }

  sol.plan.gamma = gamma;
  sol.plan.policy = restrict_to_reachable(m, index, greedy, has_action);
  const auto chain = induce_chain(m, sol.plan);
  if (!reaches_goal_surely(chain, m.goals))
    throw NonConvergence("greedy policy is improper (zero-cost cycle among optimal actions)");
  sol.plan.linearization = linearize(m, sol.plan).actions;
  return sol;
}

Linearization linearize(const Mdp& m, const Plan& p) {
  const auto chain = induce_chain(m, p);
  if (!reaches_goal_surely(chain, m.goals))
    throw ImproperPolicy(fmt::format("plan '{}' does not reach a goal with probability one", p.id));

  Linearization out;
  std::vector<bool> visited(m.states.size(), false);
  StateId s = m.start;
  visited[s] = true;
  out.states.push_back(s);
  while (!m.is_goal(s)) {
    const ActionId a = p.policy.at(s);
    const Outcome* best = nullptr;
    for (const auto& o : chain.successors[s]) {
      if (visited[o.target] || o.probability <= 0.0) continue;
      if (best == nullptr || o.probability > best->probability) best = &o;
    }
    if (best == nullptr)
      throw ImproperPolicy(fmt::format("most-probable trace of plan '{}' is stuck at state {}", p.id, s));
    out.actions.push_back(m.actions[a].label);
    out.action_ids.push_back(a);
    s = best->target;
    visited[s] = true;
    out.states.push_back(s);
  }
  return out;
}

CandidateSet generate_candidates(const Mdp& m, const CandidateOptions& opts, std::mt19937_64& rng) {
  if (opts.samples == 0) throw InvalidArgument("candidate generation needs at least one sample");
  if (!(opts.gamma_min > 0.0 && opts.gamma_min < opts.gamma_max && opts.gamma_max <= 1.0))
    throw InvalidArgument(fmt::format("gamma interval [{}, {}) must lie inside (0,1]",
                                      opts.gamma_min, opts.gamma_max));

  std::uniform_real_distribution<double> draw(opts.gamma_min, opts.gamma_max);
  std::vector<double> gammas(opts.samples);
  for (auto& g : gammas) g = draw(rng);

  CandidateSet set;
  std::exception_ptr last_error;
  for (double gamma : gammas) {
    GammaSample sample{gamma, -1, {}};
    try {
      const auto t0 = std::chrono::steady_clock::now();
      auto sol = solve(m, gamma);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      auto it = std::find_if(set.candidates.begin(), set.candidates.end(),
                             [&](const Candidate& c) { return c.plan.policy == sol.plan.policy; });
      if (it == set.candidates.end()) {
        set.candidates.push_back({std::move(sol.plan), {gamma}, secs});
        sample.candidate = static_cast<int>(set.candidates.size() - 1);
      } else {
        it->gammas.push_back(gamma);
        sample.candidate = static_cast<int>(it - set.candidates.begin());
      }
    } catch (const Error& e) {
      sample.error = e.what();
      last_error = std::current_exception();
    }
    set.samples.push_back(std::move(sample));
  }
  if (set.candidates.empty()) std::rethrow_exception(last_error);

  std::vector<std::size_t> order(set.candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.candidates[a].gammas.front() < set.candidates[b].gammas.front();
  });
  std::vector<int> rank(order.size());
  std::vector<Candidate> sorted;
  for (std::size_t r = 0; r < order.size(); ++r) {
    rank[order[r]] = static_cast<int>(r);
    sorted.push_back(std::move(set.candidates[order[r]]));
    sorted.back().plan.id = fmt::format("P{}", r + 1);
    sorted.back().plan.gamma = sorted.back().gammas.front();
  }
  set.candidates = std::move(sorted);
  for (auto& s : set.samples)
    if (s.candidate >= 0) s.candidate = rank[s.candidate];
  return set;
}

}  // namespace riskplan
