#include "riskplan/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <fmt/format.h>

#include "riskplan/errors.hpp"

namespace riskplan {

namespace {

constexpr double kNormTolerance = 1e-9;

std::vector<bool> reachable_from_start(const MarkovChain& chain,
                                       const std::set<StateId>& goals) {
  std::vector<bool> seen(chain.size(), false);
  std::deque<StateId> queue{chain.start};
  seen[chain.start] = true;
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    if (goals.count(s)) continue;
    for (const auto& o : chain.successors[s]) {
      if (o.probability > 0.0 && !seen[o.target]) {
        seen[o.target] = true;
        queue.push_back(o.target);
      }
    }
  }
  return seen;
}

// Backward closure: states from which some state in `targets` is reachable.
std::vector<bool> can_reach(const MarkovChain& chain, const std::vector<bool>& targets) {
  std::vector<std::vector<StateId>> preds(chain.size());
  for (StateId s = 0; s < chain.size(); ++s)
    for (const auto& o : chain.successors[s])
      if (o.probability > 0.0) preds[o.target].push_back(s);

  std::vector<bool> ok = targets;
  std::deque<StateId> queue;
  for (StateId s = 0; s < chain.size(); ++s)
    if (ok[s]) queue.push_back(s);
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    for (StateId p : preds[s]) {
      if (!ok[p]) {
        ok[p] = true;
        queue.push_back(p);
      }
    }
  }
  return ok;
}

struct FrontierEntry {
  StateId state;
  double cost;
  double prob;
};

void merge_frontier(std::vector<FrontierEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.state != b.state ? a.state < b.state : a.cost < b.cost;
  });
  std::vector<FrontierEntry> merged;
  merged.reserve(entries.size());
  for (const auto& e : entries) {
    if (!merged.empty() && merged.back().state == e.state &&
        e.cost - merged.back().cost <= kCostMergeTolerance) {
      merged.back().prob += e.prob;
    } else {
      merged.push_back(e);
    }
  }
  entries = std::move(merged);
}

void add_mass(std::map<double, double>& mass, double cost, double prob) {
  auto it = mass.lower_bound(cost - kCostMergeTolerance);
  if (it != mass.end() && it->first <= cost + kCostMergeTolerance) {
    it->second += prob;
  } else {
    mass.emplace(cost, prob);
  }
}

}  // namespace

SuccessorIndex::SuccessorIndex(const Mdp& m) : table_(m.states.size()) {
  for (const auto& t : m.transitions) {
    if (t.source >= table_.size()) continue;
    auto& row = table_[t.source];
    auto it = std::lower_bound(row.begin(), row.end(), t.action,
                               [](const ActionOutcomes& a, ActionId id) { return a.action < id; });
    if (it == row.end() || it->action != t.action) it = row.insert(it, ActionOutcomes{t.action, {}});
    it->outcomes.push_back({t.target, t.probability});
  }
  for (auto& row : table_)
    for (auto& a : row)
      std::sort(a.outcomes.begin(), a.outcomes.end(),
                [](const Outcome& x, const Outcome& y) { return x.target < y.target; });
}

const ActionOutcomes* SuccessorIndex::find(StateId s, ActionId a) const {
  if (s >= table_.size()) return nullptr;
  for (const auto& ao : table_[s])
    if (ao.action == a) return &ao;
  return nullptr;
}

std::vector<std::string> validate(const Mdp& m) {
  std::vector<std::string> out;
  const auto n = m.states.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = m.states[i];
    if (s.id != i)
      out.push_back(fmt::format("state at position {} has id {} (ids must be dense)", i, s.id));
    if (!(s.cost >= 0.0) || !std::isfinite(s.cost))
      out.push_back(fmt::format("state {} ('{}') has invalid cost {}", i, s.label, s.cost));
    if (s.is_goal != m.is_goal(i))
      out.push_back(fmt::format("state {} ('{}') goal flag disagrees with goal set", i, s.label));
  }
  for (std::size_t i = 0; i < m.actions.size(); ++i)
    if (m.actions[i].id != i)
      out.push_back(fmt::format("action at position {} has id {} (ids must be dense)", i,
                                m.actions[i].id));

  if (m.start >= n) out.push_back(fmt::format("start state {} is not a declared state", m.start));
  for (StateId g : m.goals)
    if (g >= n) out.push_back(fmt::format("goal state {} is not a declared state", g));

  std::map<std::pair<StateId, ActionId>, double> sums;
  for (const auto& t : m.transitions) {
    bool ok = true;
    if (t.source >= n || t.target >= n) {
      out.push_back(fmt::format("transition ({}, {}, {}) references an undeclared state", t.source,
                                t.action, t.target));
      ok = false;
    }
    if (t.action >= m.actions.size()) {
      out.push_back(fmt::format("transition ({}, {}, {}) references an undeclared action",
                                t.source, t.action, t.target));
      ok = false;
    }
    if (!(t.probability >= 0.0 && t.probability <= 1.0)) {
      out.push_back(fmt::format("transition ({}, {}, {}) has probability {} outside [0,1]",
                                t.source, t.action, t.target, t.probability));
      ok = false;
    }
    if (ok) sums[{t.source, t.action}] += t.probability;
  }
  for (const auto& [key, sum] : sums) {
    if (std::abs(sum - 1.0) > kNormTolerance) {
      const auto& [s, a] = key;
      out.push_back(fmt::format("outgoing probabilities of (state {} '{}', action {} '{}') sum to {}",
                                s, m.states[s].label, a, m.actions[a].label, sum));
    }
  }
  return out;
}

MarkovChain induce_chain(const Mdp& m, const Plan& p) {
  const SuccessorIndex index(m);
  MarkovChain chain;
  chain.successors.resize(m.states.size());
  chain.start = m.start;
  for (const auto& s : m.states) {
    chain.costs.push_back(s.cost);
    chain.labels.push_back(s.label);
  }

  std::vector<bool> seen(m.states.size(), false);
  std::deque<StateId> queue{m.start};
  seen[m.start] = true;
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    if (m.is_goal(s) || index.actions(s).empty()) continue;

    auto it = p.policy.find(s);
    if (it == p.policy.end()) throw MissingPolicyEntry(s);
    const auto* ao = index.find(s, it->second);
    if (ao == nullptr)
      throw InvalidArgument(fmt::format("plan maps state {} to action {} which has no transition",
                                        s, it->second));
    chain.successors[s] = ao->outcomes;
    for (const auto& o : ao->outcomes) {
      if (!seen[o.target]) {
        seen[o.target] = true;
        queue.push_back(o.target);
      }
    }
  }
  return chain;
}

double RewardDistribution::absorbed() const {
  double total = 0.0;
  for (const auto& [cost, p] : mass) total += p;
  return total;
}

double RewardDistribution::mean() const {
  double total = 0.0, first = 0.0;
  for (const auto& [cost, p] : mass) {
    total += p;
    first += cost * p;
  }
  return total > 0.0 ? first / total : 0.0;
}

double RewardDistribution::variance() const {
  const double mu = mean();
  double total = 0.0, second = 0.0;
  for (const auto& [cost, p] : mass) {
    total += p;
    second += (cost - mu) * (cost - mu) * p;
  }
  return total > 0.0 ? second / total : 0.0;
}

RewardDistribution reward_distribution_exact(const MarkovChain& chain,
                                             const std::set<StateId>& goals, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw InvalidArgument(fmt::format("epsilon must lie in (0,1), got {}", epsilon));
  for (double c : chain.costs)
    if (!(c >= 0.0)) throw InvalidArgument("chain costs must be non-negative");

  RewardDistribution dist;
  if (goals.count(chain.start)) {
    dist.mass.emplace(0.0, 1.0);
    return dist;
  }

  // Mass that enters a closed set of non-absorbing states never leaves it.
  std::vector<bool> absorbing(chain.size());
  for (StateId s = 0; s < chain.size(); ++s) absorbing[s] = chain.absorbing(s) || goals.count(s);
  const auto exits = can_reach(chain, absorbing);
  const auto reach = reachable_from_start(chain, goals);
  std::vector<StateId> trapped;
  for (StateId s = 0; s < chain.size(); ++s)
    if (reach[s] && !exits[s]) trapped.push_back(s);
  if (!trapped.empty())
    throw NonConvergence("frontier mass cannot shrink: a reachable cycle never reaches an "
                         "absorbing state",
                         trapped);

  constexpr std::size_t kMaxLayers = 10'000'000;
  std::vector<FrontierEntry> frontier{{chain.start, 0.0, 1.0}};
  double lost = 0.0;
  double in_flight = 1.0;
  for (std::size_t layer = 0; in_flight >= epsilon; ++layer) {
    if (layer == kMaxLayers)
      throw NonConvergence(fmt::format("frontier mass {} still above {} after {} layers",
                                       in_flight, epsilon, kMaxLayers));
    std::vector<FrontierEntry> next;
    for (const auto& e : frontier) {
      const double cost = e.cost + chain.costs[e.state];
      for (const auto& o : chain.successors[e.state]) {
        const double p = e.prob * o.probability;
        if (p == 0.0) continue;
        if (goals.count(o.target)) {
          add_mass(dist.mass, cost, p);
        } else if (chain.absorbing(o.target)) {
          lost += p;
        } else {
          next.push_back({o.target, cost, p});
        }
      }
    }
    merge_frontier(next);
    frontier = std::move(next);
    in_flight = 0.0;
    for (const auto& e : frontier) in_flight += e.prob;
  }
  dist.residual = in_flight + lost;
  return dist;
}

bool reaches_goal_surely(const MarkovChain& chain, const std::set<StateId>& goals) {
  if (goals.count(chain.start)) return true;
  std::vector<bool> is_goal(chain.size(), false);
  for (StateId g : goals)
    if (g < chain.size()) is_goal[g] = true;
  const auto ok = can_reach(chain, is_goal);
  const auto reach = reachable_from_start(chain, goals);
  for (StateId s = 0; s < chain.size(); ++s)
    if (reach[s] && !ok[s]) return false;
  return true;
}

double expected_cost(const MarkovChain& chain, const std::set<StateId>& goals) {
  if (!reaches_goal_surely(chain, goals))
    throw ImproperPolicy("goal is not reached with probability one from the start state");
  if (goals.count(chain.start)) return 0.0;

  const auto reach = reachable_from_start(chain, goals);
  std::vector<StateId> order;
  for (StateId s = 0; s < chain.size(); ++s)
    if (reach[s] && !goals.count(s)) order.push_back(s);

  constexpr double kTolerance = 1e-10;
  constexpr std::size_t kMaxSweeps = 1'000'000;
  std::vector<double> value(chain.size(), 0.0);
  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double delta = 0.0;
    for (StateId s : order) {
      double v = chain.costs[s];
      for (const auto& o : chain.successors[s]) v += o.probability * value[o.target];
      delta = std::max(delta, std::abs(v - value[s]));
      value[s] = v;
    }
    if (delta <= kTolerance) return value[chain.start];
  }
  throw NonConvergence(fmt::format("expected cost did not converge in {} sweeps", kMaxSweeps));
}

HistorySample sample_history(const MarkovChain& chain, const std::set<StateId>& goals,
                             std::mt19937_64& rng, std::size_t step_cap) {
  if (step_cap == 0) throw InvalidArgument("step cap must be at least 1");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  HistorySample out;
  StateId s = chain.start;
  for (std::size_t step = 0; step < step_cap; ++step) {
    if (goals.count(s) || chain.absorbing(s)) break;
    out.cost += chain.costs[s];
    const auto& succ = chain.successors[s];
    double u = unit(rng);
    StateId next = succ.back().target;
    for (const auto& o : succ) {
      if (u < o.probability) {
        next = o.target;
        break;
      }
      u -= o.probability;
    }
    s = next;
  }
  out.reached_goal = goals.count(s) != 0;
  return out;
}

}  // namespace riskplan
