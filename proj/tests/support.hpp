#pragma once

// Fixtures and reference solvers shared by the unit tests and the acceptance
// suite. The solvers here are written against the raw transition list and do
// not call into the library's planners.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "riskplan/mdp.hpp"

#ifndef RISKPLAN_DATA_DIR
#define RISKPLAN_DATA_DIR "data"
#endif

namespace testsupport {

using riskplan::ActionId;
using riskplan::Mdp;
using riskplan::StateId;

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(RISKPLAN_DATA_DIR) / name;
}

class MdpBuilder {
 public:
  StateId state(const std::string& label, double cost = 1.0, bool goal = false) {
    const StateId id = m_.states.size();
    m_.states.push_back({id, label, goal, cost});
    if (goal) m_.goals.insert(id);
    return id;
  }
  ActionId action(const std::string& label) {
    const ActionId id = m_.actions.size();
    m_.actions.push_back({id, label});
    return id;
  }
  MdpBuilder& edge(StateId s, ActionId a, StateId t, double p = 1.0) {
    m_.transitions.push_back({s, a, t, p});
    return *this;
  }
  MdpBuilder& start(StateId s) {
    m_.start = s;
    return *this;
  }
  Mdp build() const { return m_; }

 private:
  Mdp m_;
};

/// Start state with two actions: "a" reaches the goal with cost 10, "b"
/// with cost 2 (probability 0.9) or 30 (probability 0.1).
inline Mdp two_action_mdp() {
  MdpBuilder b;
  const auto s0 = b.state("s0", 0.0);
  const auto ten = b.state("ten", 10.0);
  const auto two = b.state("two", 2.0);
  const auto thirty = b.state("thirty", 30.0);
  const auto g = b.state("goal", 0.0, true);
  const auto a = b.action("a");
  const auto bb = b.action("b");
  const auto next = b.action("next");
  b.edge(s0, a, ten).edge(s0, bb, two, 0.9).edge(s0, bb, thirty, 0.1);
  b.edge(ten, next, g).edge(two, next, g).edge(thirty, next, g);
  return b.start(s0).build();
}

/// E[(1/gamma)^C] of both actions of two_action_mdp().
inline double disutility_a(double gamma) { return std::pow(1.0 / gamma, 10.0); }
inline double disutility_b(double gamma) {
  const double x = 1.0 / gamma;
  return 0.9 * std::pow(x, 2.0) + 0.1 * std::pow(x, 30.0);
}

/// Root of 0.9x^2 + 0.1x^30 = x^10 in x > 1 by bisection; returns gamma = 1/x.
inline double switch_gamma() {
  auto f = [](double x) { return 0.9 * x * x + 0.1 * std::pow(x, 30.0) - std::pow(x, 10.0); };
  double lo = 1.01, hi = 1.2;  // f(lo) < 0 < f(hi)
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 1.0 / (0.5 * (lo + hi));
}

using Policy = std::map<StateId, ActionId>;

struct ReferenceSolution {
  std::vector<double> value;
  Policy policy;
  /// Smallest gap between the best and second-best action over decision
  /// states reachable under the policy; +inf when no state has a choice.
  double margin = std::numeric_limits<double>::infinity();
};

inline std::map<StateId, std::map<ActionId, std::vector<std::pair<StateId, double>>>> grouped(const Mdp& m) {
  std::map<StateId, std::map<ActionId, std::vector<std::pair<StateId, double>>>> g;
  for (const auto& t : m.transitions) g[t.source][t.action].push_back({t.target, t.probability});
  return g;
}

inline Policy reachable_part(const Mdp& m, const Policy& full) {
  const auto g = grouped(m);
  Policy out;
  std::set<StateId> seen{m.start};
  std::queue<StateId> q;
  q.push(m.start);
  while (!q.empty()) {
    const auto s = q.front();
    q.pop();
    if (m.is_goal(s)) continue;
    const auto it = full.find(s);
    if (it == full.end()) continue;
    out[s] = it->second;
    for (const auto& [t, p] : g.at(s).at(it->second))
      if (p > 0.0 && seen.insert(t).second) q.push(t);
  }
  return out;
}

inline void fill_margin(const Mdp& m, ReferenceSolution& sol,
                        const std::map<StateId, std::map<ActionId, double>>& q_values) {
  sol.policy = reachable_part(m, sol.policy);
  for (const auto& [s, a] : sol.policy) {
    const auto& qs = q_values.at(s);
    for (const auto& [b, q] : qs)
      if (b != a) sol.margin = std::min(sol.margin, q - qs.at(a));
  }
}

/// Minimum expected total cost by plain value iteration; states without
/// actions that are not goals are dead ends with infinite cost.
inline ReferenceSolution expected_cost_reference(const Mdp& m) {
  const auto g = grouped(m);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> v(m.states.size(), 0.0);
  for (const auto& s : m.states)
    if (!m.is_goal(s.id) && !g.count(s.id)) v[s.id] = inf;
  std::map<StateId, std::map<ActionId, double>> q_values;
  for (int sweep = 0; sweep < 200000; ++sweep) {
    double delta = 0.0;
    for (const auto& [s, acts] : g) {
      if (m.is_goal(s)) continue;
      double best = inf;
      for (const auto& [a, outs] : acts) {
        double q = m.states[s].cost;
        for (const auto& [t, p] : outs) q += p * v[t];
        q_values[s][a] = q;
        best = std::min(best, q);
      }
      if (std::isfinite(best) || std::isfinite(v[s])) delta = std::max(delta, std::abs(best - v[s]));
      v[s] = best;
    }
    if (delta < 1e-13) break;
  }
  ReferenceSolution sol;
  sol.value = v;
  for (const auto& [s, qs] : q_values) {
    auto best = std::min_element(qs.begin(), qs.end(), [](auto& x, auto& y) { return x.second < y.second; });
    sol.policy[s] = best->first;
  }
  fill_margin(m, sol, q_values);
  return sol;
}

/// Guaranteed (worst-case) cost: W(s) = cost(s) + min_a max_{s'} W(s') over
/// outcomes with positive probability. Assumes every policy terminates.
inline ReferenceSolution worst_case_reference(const Mdp& m) {
  const auto g = grouped(m);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> w(m.states.size(), inf);
  for (auto s : m.goals) w[s] = 0.0;
  std::map<StateId, std::map<ActionId, double>> q_values;
  for (std::size_t round = 0; round <= m.states.size(); ++round) {
    for (const auto& [s, acts] : g) {
      if (m.is_goal(s)) continue;
      double best = inf;
      for (const auto& [a, outs] : acts) {
        double worst = 0.0;
        for (const auto& [t, p] : outs)
          if (p > 0.0) worst = std::max(worst, w[t]);
        const double q = m.states[s].cost + worst;
        q_values[s][a] = q;
        best = std::min(best, q);
      }
      w[s] = best;
    }
  }
  ReferenceSolution sol;
  sol.value = w;
  for (const auto& [s, qs] : q_values) {
    auto best = std::min_element(qs.begin(), qs.end(), [](auto& x, auto& y) { return x.second < y.second; });
    sol.policy[s] = best->first;
  }
  fill_margin(m, sol, q_values);
  return sol;
}

inline std::string fmt_label(int layer, int index) {
  return "s" + std::to_string(layer) + "_" + std::to_string(index);
}

/// Layered acyclic MDP: `layers` rows of `width` states, each offering
/// `actions` actions with two or three random successors in the next row
/// (probabilities at least 0.1). Last-row states have one action to the goal.
/// Costs lie in [cost_step, 3 * cost_step]: whole multiples of `cost_step`,
/// or uniform reals when `integer_costs` is false.
inline Mdp random_layered_mdp(std::mt19937_64& rng, int layers, int width, int actions, double cost_step,
                              bool integer_costs = true) {
  MdpBuilder b;
  std::uniform_int_distribution<int> whole(1, 3);
  std::uniform_real_distribution<double> real(1.0, 3.0);
  auto cost_units = [&](std::mt19937_64& r) { return integer_costs ? static_cast<double>(whole(r)) : real(r); };
  std::vector<std::vector<StateId>> rows;
  rows.push_back({b.state("s0", cost_step * cost_units(rng))});
  for (int l = 1; l < layers; ++l) {
    rows.emplace_back();
    for (int i = 0; i < width; ++i) rows.back().push_back(b.state(fmt_label(l, i), cost_step * cost_units(rng)));
  }
  const auto goal = b.state("goal", 0.0, true);
  std::vector<ActionId> acts;
  for (int a = 0; a < actions; ++a) acts.push_back(b.action("a" + std::to_string(a)));
  std::uniform_int_distribution<int> fanout(2, 3);
  for (std::size_t l = 0; l < rows.size(); ++l) {
    for (auto s : rows[l]) {
      if (l + 1 == rows.size()) {
        b.edge(s, acts.front(), goal);
        continue;
      }
      for (auto a : acts) {
        std::vector<StateId> next = rows[l + 1];
        std::shuffle(next.begin(), next.end(), rng);
        const int k = std::min<int>(fanout(rng), static_cast<int>(next.size()));
        std::vector<double> w(k);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double total = 0.0;
        for (auto& x : w) total += (x = u(rng));
        // Floor of 0.1 per outcome, remainder split by the random weights.
        const double spare = 1.0 - 0.1 * k;
        double used = 0.0;
        for (int i = 0; i < k; ++i) {
          const double p = i + 1 == k ? 1.0 - used : 0.1 + spare * w[i] / total;
          used += p;
          b.edge(s, a, next[i], p);
        }
      }
    }
  }
  return b.start(rows.front().front()).build();
}

/// First `count` random layered models whose reference optimum beats every
/// alternative by at least `min_margin` at each state the plan reaches.
/// Worst-case models use whole-unit costs of 4 on 3 x 5 layers, where a
/// margin of 4 outweighs the 0.1 probability floor at gamma 0.05;
/// expected-cost models use real costs on 4 x 3 layers.
inline std::vector<Mdp> clear_margin_models(std::uint64_t seed, std::size_t count, double min_margin,
                                            bool worst_case) {
  std::mt19937_64 rng(seed);
  std::vector<Mdp> out;
  for (int tries = 0; out.size() < count && tries < 100000; ++tries) {
    auto m = worst_case ? random_layered_mdp(rng, 3, 5, 3, 4.0, true) : random_layered_mdp(rng, 4, 3, 3, 1.0, false);
    const auto ref = worst_case ? worst_case_reference(m) : expected_cost_reference(m);
    if (ref.margin >= min_margin) out.push_back(std::move(m));
  }
  return out;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t n = 0;
};

/// Cost of `n` histories sampled straight from the chain's successor lists.
inline Moments monte_carlo_moments(const riskplan::MarkovChain& chain, const std::set<StateId>& goals, std::size_t n,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::discrete_distribution<std::size_t>> pick(chain.size());
  for (std::size_t s = 0; s < chain.size(); ++s) {
    std::vector<double> w;
    for (const auto& o : chain.successors[s]) w.push_back(o.probability);
    if (!w.empty()) pick[s] = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    StateId s = chain.start;
    double c = 0.0;
    while (!goals.count(s)) {
      c += chain.costs[s];
      s = chain.successors[s][pick[s](rng)].target;
    }
    sum += c;
    sum2 += c * c;
  }
  Moments m;
  m.n = n;
  m.mean = sum / static_cast<double>(n);
  m.variance = (sum2 - static_cast<double>(n) * m.mean * m.mean) / static_cast<double>(n - 1);
  return m;
}

}  // namespace testsupport
