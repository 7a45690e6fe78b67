#pragma once

// Reference estimators: tabular TD(0), online TD(lambda) with accumulating
// traces, and first-visit Monte Carlo ground truth.

#include <cstdint>
#include <vector>

#include "rvf/mrp.hpp"
#include "rvf/random.hpp"
#include "rvf/tables.hpp"

namespace rvf {

// One online TD(0) episode: sample a transition, update, repeat. Returns
// the per-step TD errors. Both baselines consume exactly one uniform draw
// per transition (via sample_next_state), so a run can be replayed against
// other learners under a shared seed.
std::vector<double> td0_episode(const MarkovRewardProcess& mrp,
                                const ObservationMap& obs, ValueTable& table,
                                double lr, Rng& rng, int max_steps = 10000);

// Online TD(lambda), accumulating traces: z <- gamma*lambda*z + onehot(o),
// then theta += lr * delta * z. lambda = 0 reproduces td0_episode bit for
// bit under a shared seed.
std::vector<double> td_lambda_online_episode(const MarkovRewardProcess& mrp,
                                             const ObservationMap& obs,
                                             ValueTable& table, double lr,
                                             double lambda, Rng& rng,
                                             int max_steps = 10000);

struct MonteCarloReport {
  std::vector<double> mean;      // first-visit return average per observation
  std::vector<double> se;        // standard error (0 when fewer than 2 visits)
  std::vector<int> n_visits;     // episodes in which the observation appeared
  std::vector<std::uint8_t> visited;  // 0 marks observations never seen

  int n_obs() const { return static_cast<int>(mean.size()); }
};

// First-visit Monte Carlo over n_episodes sampled episodes. Observations
// that never appear are flagged unvisited, not silently reported as zero.
// Episodes cut at max_steps before terminating are discarded (their
// returns are not defined).
MonteCarloReport monte_carlo_values(const MarkovRewardProcess& mrp,
                                    const ObservationMap& obs, Rng& rng,
                                    int n_episodes, int max_steps = 10000);

}  // namespace rvf
