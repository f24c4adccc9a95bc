#pragma once

#include <cstddef>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace riskplan {

using StateId = std::size_t;
using ActionId = std::size_t;

struct StateInfo {
  StateId id = 0;
  std::string label;
  bool is_goal = false;
  double cost = 0.0;
};

struct ActionInfo {
  ActionId id = 0;
  std::string label;
};

struct Transition {
  StateId source = 0;
  ActionId action = 0;
  StateId target = 0;
  double probability = 0.0;
};

/// Finite goal-directed MDP with per-state costs. State and action ids are
/// dense and 0-based: `states[i].id == i`, `actions[i].id == i`.
struct Mdp {
  std::vector<StateInfo> states;
  std::vector<ActionInfo> actions;
  std::vector<Transition> transitions;
  StateId start = 0;
  std::set<StateId> goals;

  bool is_goal(StateId s) const { return goals.count(s) != 0; }
};

struct Outcome {
  StateId target = 0;
  double probability = 0.0;
};

struct ActionOutcomes {
  ActionId action = 0;
  std::vector<Outcome> outcomes;
};

/// Transitions of an Mdp grouped per state, actions sorted by id and
/// outcomes sorted by target. Built once and shared by the solvers.
class SuccessorIndex {
 public:
  explicit SuccessorIndex(const Mdp& m);

  std::span<const ActionOutcomes> actions(StateId s) const { return table_[s]; }
  const ActionOutcomes* find(StateId s, ActionId a) const;
  std::size_t num_states() const { return table_.size(); }

 private:
  std::vector<std::vector<ActionOutcomes>> table_;
};

/// Returns one human-readable line per broken invariant; empty when `m` is
/// well formed. Never throws.
std::vector<std::string> validate(const Mdp& m);

/// A policy plus its linearized high-level schema.
struct Plan {
  std::map<StateId, ActionId> policy;
  std::string id;
  double gamma = 1.0;
  std::vector<std::string> linearization;
};

/// Markov chain induced by fixing a plan. Absorbing states (goals and dead
/// ends) have an empty successor list.
struct MarkovChain {
  std::vector<std::vector<Outcome>> successors;
  std::vector<double> costs;
  std::vector<std::string> labels;
  StateId start = 0;

  std::size_t size() const { return successors.size(); }
  bool absorbing(StateId s) const { return successors[s].empty(); }
};

MarkovChain induce_chain(const Mdp& m, const Plan& p);

/// Exact distribution of the cumulative cost at first goal entry. Costs
/// closer than 1e-9 share one support point.
struct RewardDistribution {
  std::map<double, double> mass;
  /// Probability not absorbed at a goal: mass still in flight when the
  /// enumeration stopped plus mass trapped in dead ends.
  double residual = 0.0;

  double absorbed() const;
  /// Moments conditioned on reaching the goal.
  double mean() const;
  double variance() const;
};

inline constexpr double kCostMergeTolerance = 1e-9;

RewardDistribution reward_distribution_exact(const MarkovChain& chain,
                                             const std::set<StateId>& goals,
                                             double epsilon);

/// E[cumulative cost]; throws ImproperPolicy when the goal is not reached
/// with probability one.
double expected_cost(const MarkovChain& chain, const std::set<StateId>& goals);

/// True iff every state reachable from the start (before a goal) can still
/// reach a goal, i.e. the goal is hit with probability one.
bool reaches_goal_surely(const MarkovChain& chain, const std::set<StateId>& goals);

struct HistorySample {
  double cost = 0.0;
  bool reached_goal = false;
};

HistorySample sample_history(const MarkovChain& chain, const std::set<StateId>& goals,
                             std::mt19937_64& rng, std::size_t step_cap);

}  // namespace riskplan
