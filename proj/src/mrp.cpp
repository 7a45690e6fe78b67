#include "rvf/mrp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "rvf/errors.hpp"

namespace rvf {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<int> MarkovRewardProcess::terminal_states() const {
  std::vector<int> out;
  for (int s = 0; s < n_states; ++s)
    if (terminal[s]) out.push_back(s);
  return out;
}

void MarkovRewardProcess::validate() const {
  if (n_states <= 0) throw TopologyError("chain must have at least one state");
  if (static_cast<int>(transition.size()) != n_states ||
      static_cast<int>(reward.size()) != n_states ||
      static_cast<int>(terminal.size()) != n_states)
    throw TopologyError("transition/reward/terminal sizes disagree with n_states");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw TopologyError("gamma must lie in [0, 1)");
  if (start_state < 0 || start_state >= n_states)
    throw TopologyError("start_state out of range");
  for (int s = 0; s < n_states; ++s) {
    const auto& row = transition[s];
    if (static_cast<int>(row.size()) != n_states)
      throw TopologyError("transition row " + std::to_string(s) +
                          " has wrong length");
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0) || !std::isfinite(p))
        throw TopologyError("negative or non-finite transition probability in row " +
                            std::to_string(s));
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-12)
      throw TopologyError("transition row " + std::to_string(s) +
                          " sums to " + fmt17(sum) + ", expected 1");
    if (terminal[s] && std::fabs(row[s] - 1.0) > 1e-12)
      throw TopologyError("terminal state " + std::to_string(s) +
                          " must self-loop with probability 1");
    if (!std::isfinite(reward[s]))
      throw TopologyError("non-finite reward at state " + std::to_string(s));
  }
}

void ObservationMap::validate(int n_states) const {
  if (static_cast<int>(obs_of_state.size()) != n_states)
    throw TopologyError("observation map size disagrees with n_states");
  if (n_obs <= 0) throw TopologyError("observation map must have n_obs > 0");
  std::vector<char> hit(n_obs, 0);
  for (int o : obs_of_state) {
    if (o < 0 || o >= n_obs)
      throw TopologyError("observation index out of range");
    hit[o] = 1;
  }
  for (int o = 0; o < n_obs; ++o)
    if (!hit[o])
      throw TopologyError("observation " + std::to_string(o) +
                          " is not produced by any state");
}

Ychain build_ychain(int branch_len, double gamma, int stem_len) {
  if (branch_len < 2)
    throw TopologyError("branch_len must be >= 2 (the aliased state is the "
                        "penultimate branch state)");
  if (stem_len < 1) throw TopologyError("stem_len must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw TopologyError("gamma must lie in [0, 1)");

  const int m = stem_len, l = branch_len;
  const int n = m + 2 * l + 2;

  Ychain y;
  y.layout.stem_len = m;
  y.layout.branch_len = l;
  y.layout.junction = m - 1;
  y.layout.top_entry = m;
  y.layout.top_aliased = m + l - 2;
  y.layout.top_exit = m + l - 1;
  y.layout.bottom_entry = m + l;
  y.layout.bottom_aliased = m + 2 * l - 2;
  y.layout.bottom_exit = m + 2 * l - 1;
  y.layout.top_terminal = m + 2 * l;
  y.layout.bottom_terminal = m + 2 * l + 1;

  auto& mrp = y.mrp;
  mrp.n_states = n;
  mrp.gamma = gamma;
  mrp.start_state = 0;
  mrp.transition.assign(n, std::vector<double>(n, 0.0));
  mrp.reward.assign(n, 0.0);
  mrp.terminal.assign(n, 0);

  // Stem: deterministic walk to the junction.
  for (int s = 0; s + 1 < m; ++s) mrp.transition[s][s + 1] = 1.0;
  // Junction: coin flip into the branch entries.
  mrp.transition[y.layout.junction][y.layout.top_entry] = 0.5;
  mrp.transition[y.layout.junction][y.layout.bottom_entry] = 0.5;
  // Branches: deterministic walks into their terminals.
  for (int k = 0; k + 1 < l; ++k) {
    mrp.transition[m + k][m + k + 1] = 1.0;
    mrp.transition[m + l + k][m + l + k + 1] = 1.0;
  }
  mrp.transition[y.layout.top_exit][y.layout.top_terminal] = 1.0;
  mrp.transition[y.layout.bottom_exit][y.layout.bottom_terminal] = 1.0;
  mrp.transition[y.layout.top_terminal][y.layout.top_terminal] = 1.0;
  mrp.transition[y.layout.bottom_terminal][y.layout.bottom_terminal] = 1.0;

  mrp.reward[y.layout.top_terminal] = 1.0;
  mrp.reward[y.layout.bottom_terminal] = -1.0;
  mrp.terminal[y.layout.top_terminal] = 1;
  mrp.terminal[y.layout.bottom_terminal] = 1;

  // Observations: identity except the two penultimate branch states, which
  // share the top one's index.
  auto& om = y.obs;
  om.obs_of_state.resize(n);
  const int dup = y.layout.bottom_aliased;
  for (int s = 0; s < n; ++s) {
    if (s < dup)
      om.obs_of_state[s] = s;
    else if (s == dup)
      om.obs_of_state[s] = y.layout.top_aliased;
    else
      om.obs_of_state[s] = s - 1;
  }
  om.n_obs = n - 1;
  y.layout.aliased_obs = y.layout.top_aliased;

  mrp.validate();
  om.validate(n);
  return y;
}

MarkovRewardProcess build_random_mrp(int n_states, std::uint64_t seed,
                                     double r_min, double r_max, double gamma,
                                     double assumption_d) {
  if (n_states < 2) throw TopologyError("random chain needs n_states >= 2");
  if (!(r_min <= r_max))
    throw TopologyError("reward range is empty (r_min > r_max)");
  if (assumption_d > 0.0) {
    const double d = assumption_d;
    if (!(d > 0.5 && d <= 1.0))
      throw ConstraintError("emphasis floor must satisfy 0.5 < D <= 1, got D = " +
                            fmt17(d));
    if (!(d > gamma))
      throw ConstraintError("D > gamma violated: D = " + fmt17(d) +
                            " <= gamma = " + fmt17(gamma));
    if (!(r_min > 0.0))
      throw ConstraintError("rewards must be positive: R_min = " + fmt17(r_min));
    if (d * r_max > r_min)
      throw ConstraintError("D*R_max <= R_min violated: " + fmt17(d) + "*" +
                            fmt17(r_max) + " = " + fmt17(d * r_max) + " > " +
                            fmt17(r_min));
  }

  Rng rng(seed);
  MarkovRewardProcess mrp;
  mrp.n_states = n_states;
  mrp.gamma = gamma;
  mrp.start_state = 0;
  mrp.transition.assign(n_states, std::vector<double>(n_states, 0.0));
  mrp.reward.resize(n_states);
  mrp.terminal.assign(n_states, 0);

  for (int s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (int t = 0; t < n_states; ++t) {
      // Strictly positive entries keep the chain irreducible and aperiodic.
      mrp.transition[s][t] = 0.05 + rng.unit();
      sum += mrp.transition[s][t];
    }
    for (int t = 0; t < n_states; ++t) mrp.transition[s][t] /= sum;
    // Renormalize the row exactly: push rounding slack into the largest entry.
    double acc = 0.0;
    int arg = 0;
    for (int t = 0; t < n_states; ++t) {
      acc += mrp.transition[s][t];
      if (mrp.transition[s][t] > mrp.transition[s][arg]) arg = t;
    }
    mrp.transition[s][arg] += 1.0 - acc;
    mrp.reward[s] = rng.uniform(r_min, r_max);
  }

  mrp.validate();
  return mrp;
}

std::vector<double> exact_values(const MarkovRewardProcess& mrp) {
  mrp.validate();
  const int n = mrp.n_states;
  std::vector<int> live;  // non-terminal states, in index order
  for (int s = 0; s < n; ++s)
    if (!mrp.is_terminal(s)) live.push_back(s);

  std::vector<double> values(n, 0.0);
  const int k = static_cast<int>(live.size());
  if (k == 0) return values;

  // (I - gamma * P_NN) V_N = P_N. r   over the non-terminal block.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd b(k);
  for (int i = 0; i < k; ++i) {
    const int s = live[i];
    double bi = 0.0;
    for (int t = 0; t < n; ++t) bi += mrp.transition[s][t] * mrp.reward[t];
    b(i) = bi;
    a(i, i) = 1.0;
    for (int j = 0; j < k; ++j)
      a(i, j) -= mrp.gamma * mrp.transition[s][live[j]];
  }

  Eigen::VectorXd v = a.partialPivLu().solve(b);
  const double residual = (a * v - b).lpNorm<Eigen::Infinity>();
  const double scale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
  if (!std::isfinite(residual) || residual > 1e-10 * scale)
    throw NumericalError("value system is singular or badly conditioned "
                         "(residual " + fmt17(residual) + ")");

  for (int i = 0; i < k; ++i) values[live[i]] = v(i);
  return values;
}

StationaryReport stationary_check(const MarkovRewardProcess& mrp) {
  mrp.validate();
  const int n = mrp.n_states;
  StationaryReport report;

  // Reachability closure per state over the support graph.
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (int s = 0; s < n; ++s) {
    std::vector<int> stack{s};
    reach[s][s] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int t = 0; t < n; ++t)
        if (mrp.transition[u][t] > 1e-15 && !reach[s][t]) {
          reach[s][t] = 1;
          stack.push_back(t);
        }
    }
  }
  for (int t = 0; t < n; ++t)
    for (int s = 0; s < n; ++s)
      if (!reach[s][t]) {
        report.unreachable_states.push_back(t);
        break;
      }
  if (!report.unreachable_states.empty()) {
    report.ergodic = false;
    report.message = "chain is reducible: some states are not reachable from "
                     "every state";
    return report;
  }

  std::vector<double> pi(n, 1.0 / n), next(n, 0.0);
  const int max_iters = 200000;
  for (int it = 0; it < max_iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < n; ++s)
      for (int t = 0; t < n; ++t) next[t] += pi[s] * mrp.transition[s][t];
    double change = 0.0;
    for (int s = 0; s < n; ++s)
      change = std::max(change, std::fabs(next[s] - pi[s]));
    pi.swap(next);
    if (change < 1e-12) {
      report.ergodic = true;
      report.distribution = pi;
      for (int s = 0; s < n; ++s)
        if (pi[s] < 1e-9) report.transient_states.push_back(s);
      report.message = report.transient_states.empty()
                           ? "ok"
                           : "ok, but some states carry negligible mass";
      return report;
    }
  }
  report.ergodic = false;
  report.message = "power iteration did not converge: chain is periodic or "
                   "mixes too slowly";
  return report;
}

int sample_next_state(const MarkovRewardProcess& mrp, int s, Rng& rng) {
  const double u = rng.unit();
  double acc = 0.0;
  const auto& row = mrp.transition[s];
  for (int j = 0; j < mrp.n_states; ++j) {
    acc += row[j];
    if (u < acc) return j;
  }
  return mrp.n_states - 1;  // guard against rounding in the row sum
}

Trajectory sample_trajectory(const MarkovRewardProcess& mrp,
                             const ObservationMap& obs, Rng& rng,
                             int max_steps) {
  if (max_steps < 1) throw TopologyError("max_steps must be >= 1");
  Trajectory traj;
  int s = mrp.start_state;
  for (int t = 0; t < max_steps; ++t) {
    if (mrp.is_terminal(s)) break;  // start state may itself be terminal
    const int next = sample_next_state(mrp, s, rng);
    traj.steps.push_back({s, obs(s), mrp.reward[next]});
    s = next;
    if (mrp.is_terminal(s)) {
      traj.terminated = true;
      break;
    }
  }
  traj.final_state = s;
  traj.final_obs = obs(s);
  return traj;
}

void save_mrp(std::ostream& out, const MarkovRewardProcess& mrp) {
  mrp.validate();
  out << "mrp 1\n";
  out << "n_states " << mrp.n_states << "\n";
  out << "gamma " << fmt17(mrp.gamma) << "\n";
  out << "start " << mrp.start_state << "\n";
  const auto terms = mrp.terminal_states();
  out << "terminals " << terms.size();
  for (int t : terms) out << " " << t;
  out << "\n";
  out << "P\n";
  for (const auto& row : mrp.transition) {
    for (int j = 0; j < mrp.n_states; ++j)
      out << (j ? " " : "") << fmt17(row[j]);
    out << "\n";
  }
  out << "r\n";
  for (int s = 0; s < mrp.n_states; ++s)
    out << (s ? " " : "") << fmt17(mrp.reward[s]);
  out << "\n";
}

MarkovRewardProcess load_mrp(std::istream& in) {
  auto fail = [](const std::string& what) -> MarkovRewardProcess {
    throw TopologyError("malformed chain file: " + what);
  };
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "mrp" || version != 1)
    return fail("expected header 'mrp 1'");

  MarkovRewardProcess mrp;
  std::string key;
  int n_terms = 0;
  if (!(in >> key >> mrp.n_states) || key != "n_states" || mrp.n_states <= 0)
    return fail("n_states");
  if (!(in >> key >> mrp.gamma) || key != "gamma") return fail("gamma");
  if (!(in >> key >> mrp.start_state) || key != "start") return fail("start");
  if (!(in >> key >> n_terms) || key != "terminals" || n_terms < 0)
    return fail("terminals");
  mrp.terminal.assign(mrp.n_states, 0);
  for (int i = 0; i < n_terms; ++i) {
    int t;
    if (!(in >> t) || t < 0 || t >= mrp.n_states) return fail("terminal index");
    mrp.terminal[t] = 1;
  }
  if (!(in >> key) || key != "P") return fail("P section");
  mrp.transition.assign(mrp.n_states, std::vector<double>(mrp.n_states));
  for (auto& row : mrp.transition)
    for (double& p : row)
      if (!(in >> p)) return fail("transition entry");
  if (!(in >> key) || key != "r") return fail("r section");
  mrp.reward.resize(mrp.n_states);
  for (double& r : mrp.reward)
    if (!(in >> r)) return fail("reward entry");

  mrp.validate();
  return mrp;
}

void save_mrp_file(const std::string& path, const MarkovRewardProcess& mrp) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  save_mrp(out, mrp);
}

MarkovRewardProcess load_mrp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for reading: " + path);
  return load_mrp(in);
}

}  // namespace rvf
