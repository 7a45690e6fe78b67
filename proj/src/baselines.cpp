#include "rvf/baselines.hpp"

#include <cmath>
#include <cstdio>

#include "rvf/errors.hpp"

namespace rvf {

namespace {

constexpr double kDivergenceCeiling = 1e8;

void guard(double x, const char* what, int step) {
  if (!std::isfinite(x) || std::fabs(x) > kDivergenceCeiling) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s blew up at step %d", what, step);
    throw DivergenceError(buf, step);
  }
}

void check_tables(const MarkovRewardProcess& mrp, const ObservationMap& obs,
                  const ValueTable& table, double lr, int max_steps) {
  obs.validate(mrp.n_states);
  if (table.size() != obs.n_obs)
    throw ConfigError("value table size disagrees with the observation space");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
}

}  // namespace

std::vector<double> td0_episode(const MarkovRewardProcess& mrp,
                                const ObservationMap& obs, ValueTable& table,
                                double lr, Rng& rng, int max_steps) {
  check_tables(mrp, obs, table, lr, max_steps);
  std::vector<double> deltas;
  int s = mrp.start_state;
  for (int t = 0; t < max_steps && !mrp.is_terminal(s); ++t) {
    const int next = sample_next_state(mrp, s, rng);
    const int o = obs(s);
    const double boot = mrp.is_terminal(next) ? 0.0 : table(obs(next));
    const double target = mrp.reward[next] + mrp.gamma * boot;
    const double delta = target - table(o);
    guard(delta, "TD error", t);
    table(o) += lr * delta;
    guard(table(o), "value table", t);
    deltas.push_back(delta);
    s = next;
  }
  return deltas;
}

std::vector<double> td_lambda_online_episode(const MarkovRewardProcess& mrp,
                                             const ObservationMap& obs,
                                             ValueTable& table, double lr,
                                             double lambda, Rng& rng,
                                             int max_steps) {
  check_tables(mrp, obs, table, lr, max_steps);
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ConfigError("lambda must lie in [0, 1]");

  std::vector<double> z(obs.n_obs, 0.0);
  std::vector<double> deltas;
  const double decay = mrp.gamma * lambda;
  int s = mrp.start_state;
  for (int t = 0; t < max_steps && !mrp.is_terminal(s); ++t) {
    const int next = sample_next_state(mrp, s, rng);
    const int o = obs(s);
    const double boot = mrp.is_terminal(next) ? 0.0 : table(obs(next));
    const double target = mrp.reward[next] + mrp.gamma * boot;
    const double delta = target - table(o);
    guard(delta, "TD error", t);
    for (double& e : z) e *= decay;
    z[o] += 1.0;
    const double scale = lr * delta;
    for (int j = 0; j < obs.n_obs; ++j) {
      if (z[j] == 0.0) continue;
      table(j) += scale * z[j];
      guard(table(j), "value table", t);
    }
    deltas.push_back(delta);
    s = next;
  }
  return deltas;
}

MonteCarloReport monte_carlo_values(const MarkovRewardProcess& mrp,
                                    const ObservationMap& obs, Rng& rng,
                                    int n_episodes, int max_steps) {
  obs.validate(mrp.n_states);
  if (n_episodes < 1) throw ConfigError("n_episodes must be >= 1");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");

  const int n = obs.n_obs;
  MonteCarloReport report;
  report.mean.assign(n, 0.0);
  report.se.assign(n, 0.0);
  report.n_visits.assign(n, 0);
  report.visited.assign(n, 0);
  std::vector<double> m2(n, 0.0);  // Welford accumulators per observation

  std::vector<double> returns;
  std::vector<int> first_visit(n, -1);
  for (int ep = 0; ep < n_episodes; ++ep) {
    const Trajectory traj = sample_trajectory(mrp, obs, rng, max_steps);
    if (!traj.terminated) continue;  // no return to credit
    const int len = traj.length();

    // Discounted return from each step, accumulated backwards.
    returns.assign(len, 0.0);
    double g = 0.0;
    for (int t = len - 1; t >= 0; --t) {
      g = traj.steps[t].reward + mrp.gamma * g;
      returns[t] = g;
    }

    std::fill(first_visit.begin(), first_visit.end(), -1);
    for (int t = 0; t < len; ++t)
      if (first_visit[traj.steps[t].obs] < 0) first_visit[traj.steps[t].obs] = t;

    for (int o = 0; o < n; ++o) {
      if (first_visit[o] < 0) continue;
      const double x = returns[first_visit[o]];
      report.visited[o] = 1;
      report.n_visits[o] += 1;
      const double d = x - report.mean[o];
      report.mean[o] += d / report.n_visits[o];
      m2[o] += d * (x - report.mean[o]);
    }
  }

  for (int o = 0; o < n; ++o) {
    if (report.n_visits[o] >= 2) {
      const double var = m2[o] / (report.n_visits[o] - 1);
      report.se[o] = std::sqrt(var / report.n_visits[o]);
    }
  }
  return report;
}

}  // namespace rvf
