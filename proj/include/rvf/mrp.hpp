#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rvf/random.hpp"

namespace rvf {

// Finite Markov reward process under a fixed policy.
//
// Reward convention: reward[s] is collected on *entering* s, so values
// satisfy
//
//   V(s) = sum_{s'} P(s, s') * (reward[s'] + gamma * V(s'))
//
// for non-terminal s. Terminal states are absorbing self-loops whose
// continuation is worth nothing: entering a terminal pays its reward once,
// after which every subsequent reward is zero and V(terminal) = 0.
struct MarkovRewardProcess {
  int n_states = 0;
  std::vector<std::vector<double>> transition;  // row-stochastic, n x n
  std::vector<double> reward;                   // per-state entering reward
  double gamma = 0.0;
  int start_state = 0;
  std::vector<std::uint8_t> terminal;  // mask, size n_states

  bool is_terminal(int s) const { return terminal[s] != 0; }
  std::vector<int> terminal_states() const;

  // Throws TopologyError unless rows sum to 1 within 1e-12, terminals
  // self-loop, gamma is in [0, 1) and indices are in range.
  void validate() const;
};

// Many-to-one map from states to observation indices. Aliasing is expressed
// by two states sharing an observation. Each observation index in
// [0, n_obs) must be hit by at least one state.
struct ObservationMap {
  std::vector<int> obs_of_state;
  int n_obs = 0;

  int operator()(int s) const { return obs_of_state[s]; }
  void validate(int n_states) const;
};

// One sampled episode (or truncated segment). steps[t].reward is the reward
// collected on the transition out of steps[t].state, i.e. the entering
// reward of the next state. final_state is the state arrived at after the
// last recorded transition: a terminal when `terminated`, otherwise the
// state where sampling was cut off.
struct Trajectory {
  struct Step {
    int state;
    int obs;
    double reward;
  };

  std::vector<Step> steps;
  bool terminated = false;
  int final_state = -1;
  int final_obs = -1;

  int length() const { return static_cast<int>(steps.size()); }
};

// Aliased Y-chain: a stem of `stem_len` states ending at a junction, which
// splits 50/50 into two branches of `branch_len` states each. The top
// branch exits into a terminal paying +1, the bottom into one paying -1;
// every other reward is zero. The penultimate state of each branch shares
// a single observation (the aliased pair), all other states are uniquely
// observed. With gamma = 0.9 the aliased states are worth +0.9 and -0.9.
struct YchainLayout {
  int stem_len = 0;
  int branch_len = 0;
  int junction = -1;
  int top_entry = -1, bottom_entry = -1;
  int top_aliased = -1, bottom_aliased = -1;
  int top_exit = -1, bottom_exit = -1;
  int top_terminal = -1, bottom_terminal = -1;
  int aliased_obs = -1;
};

struct Ychain {
  MarkovRewardProcess mrp;
  ObservationMap obs;
  YchainLayout layout;
};

// branch_len must be >= 2 so the aliased (penultimate) state exists. The
// default stem is a single state, i.e. the walk starts at the junction.
Ychain build_ychain(int branch_len, double gamma, int stem_len = 1);

// Dense random ergodic chain (all transition entries positive, no
// terminals) with per-state rewards uniform in [r_min, r_max]. When
// `assumption_d` is given, the reward/discount configuration is checked
// against the contraction assumptions (d in (0.5, 1], d > gamma,
// d * r_max <= r_min, rewards positive) and a ConstraintError naming the
// violated inequality is thrown otherwise.
MarkovRewardProcess build_random_mrp(int n_states, std::uint64_t seed,
                                     double r_min, double r_max, double gamma,
                                     double assumption_d = -1.0);

// Exact values by solving the linear system restricted to non-terminal
// states; terminal values are identically zero. Throws NumericalError if
// the solve leaves a residual above 1e-10.
std::vector<double> exact_values(const MarkovRewardProcess& mrp);

struct StationaryReport {
  bool ergodic = false;
  std::vector<double> distribution;     // empty when not ergodic
  std::vector<int> transient_states;    // stationary mass below 1e-9
  std::vector<int> unreachable_states;  // not reachable from every state
  std::string message;
};

// Power-iterates pi <- pi P from the uniform distribution until the change
// drops below 1e-12. Reducible chains are detected by reachability and
// reported with the offending states; chains that fail to converge are
// reported as periodic / badly mixing.
StationaryReport stationary_check(const MarkovRewardProcess& mrp);

// Draw the successor of state s (one uniform variate per call). Every
// sampler goes through this, so two algorithms fed the same Rng see the
// same state sequence.
int sample_next_state(const MarkovRewardProcess& mrp, int s, Rng& rng);

// Sample an episode from start_state. Stops on entering a terminal or
// after max_steps transitions.
Trajectory sample_trajectory(const MarkovRewardProcess& mrp,
                             const ObservationMap& obs, Rng& rng,
                             int max_steps);

// Plain-text round-trippable serialization (17 significant digits, so
// load(save(m)) reproduces the exact doubles).
void save_mrp(std::ostream& out, const MarkovRewardProcess& mrp);
MarkovRewardProcess load_mrp(std::istream& in);
void save_mrp_file(const std::string& path, const MarkovRewardProcess& mrp);
MarkovRewardProcess load_mrp_file(const std::string& path);

}  // namespace rvf
