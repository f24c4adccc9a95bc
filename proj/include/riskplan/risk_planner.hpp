#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "riskplan/mdp.hpp"

namespace riskplan {

struct PseudoTransition {
  StateId source = 0;
  ActionId action = 0;
  StateId target = 0;
  /// P(s,a,s') * (-gamma^R(s)), always in [-1, 0].
  double pseudo_probability = 0.0;
};

/// The MDP with transition probabilities replaced by gamma-weighted
/// pseudo-probabilities. Kept for inspection and export; the solver works
/// on the positive per-step disutility instead.
struct TransformedModel {
  std::vector<StateInfo> states;
  std::vector<ActionInfo> actions;
  std::vector<PseudoTransition> transitions;
  StateId start = 0;
  std::set<StateId> goals;
  double gamma = 0.0;
};

TransformedModel transform(const Mdp& m, double gamma);

/// Exponential disutility E[(1/gamma)^C] per state. Goals hold 1, states
/// without a proper policy hold +infinity.
struct ValueTable {
  std::vector<double> value;
  double gamma = 0.0;
};

struct SolveOptions {
  double tolerance = 1e-10;
  std::size_t max_sweeps = 1'000'000;
};

struct Solution {
  ValueTable values;
  Plan plan;
  std::size_t sweeps = 0;
};

/// Risk-sensitive value iteration for the exponential-utility criterion.
/// The returned plan covers the states reachable from the start under it;
/// greedy ties go to the lowest action id.
Solution solve(const Mdp& m, double gamma, const SolveOptions& opts = {});

/// States from which some policy reaches a goal with probability one.
std::vector<bool> almost_sure_goal_states(const Mdp& m, const SuccessorIndex& index);

struct Linearization {
  std::vector<std::string> actions;
  std::vector<ActionId> action_ids;
  /// Visited states, start first; one longer than `actions`.
  std::vector<StateId> states;
  std::size_t steps() const { return actions.size(); }
};

/// Most-probable execution trace of a proper plan: at each state take the
/// likeliest successor not yet on the trace, ties to the lowest state id.
Linearization linearize(const Mdp& m, const Plan& p);

struct CandidateOptions {
  std::size_t samples = 20;
  double gamma_min = 0.4;
  double gamma_max = 1.0;
};

struct Candidate {
  Plan plan;
  /// Every sampled gamma that produced this policy, in sampling order.
  std::vector<double> gammas;
  /// Wall-clock seconds of the first producing solve.
  double planning_time_s = 0.0;
};

struct GammaSample {
  double gamma = 0.0;
  /// Index into CandidateSet::candidates, or -1 when the solve failed.
  int candidate = -1;
  std::string error;
};

struct CandidateSet {
  std::vector<Candidate> candidates;
  std::vector<GammaSample> samples;
};

/// Samples gammas uniformly from [gamma_min, gamma_max), solves each and
/// merges identical policies. Candidates are ordered by the gamma that first
/// produced them and named P1, P2, ...
CandidateSet generate_candidates(const Mdp& m, const CandidateOptions& opts, std::mt19937_64& rng);

}  // namespace riskplan
