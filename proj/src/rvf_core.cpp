#include "rvf/rvf_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace rvf {

namespace {

constexpr double kDivergenceCeiling = 1e8;

std::string step_tag(int step_index) {
  if (step_index < 0) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), " at step %d", step_index);
  return buf;
}

struct BlendOut {
  double v_theta;
  double beta;     // weight applied to v_theta (1 on the init step)
  double carried;  // what (1 - beta) multiplied
  double v_beta;
};

// The value half of one recursion step. Every code path that advances the
// estimate (live stepping, replay, frozen evaluation) goes through this so
// they agree to the last bit.
BlendOut blend_math(bool first, int obs, double reward_in, double v_beta_prev,
                    const ValueTable& theta, const BetaView& beta,
                    bool reward_adjusted) {
  BlendOut o;
  o.v_theta = theta(obs);
  if (first) {
    o.beta = 1.0;
    o.carried = o.v_theta;
    o.v_beta = o.v_theta;
    return o;
  }
  o.beta = beta.beta(obs);
  o.carried = reward_adjusted ? v_beta_prev - reward_in : v_beta_prev;
  o.v_beta = rvf_value(o.beta, o.v_theta, o.carried);
  return o;
}

// The trace half: decay everything by (1 - beta), then deposit the current
// step's contribution at the observation just seen.
void trace_step(bool first, int obs, const BlendOut& s, const BetaView& beta,
                std::vector<double>& e_theta, std::vector<double>& e_omega) {
  if (first) {
    std::fill(e_theta.begin(), e_theta.end(), 0.0);
    std::fill(e_omega.begin(), e_omega.end(), 0.0);
    e_theta[obs] = 1.0;
    return;
  }
  const double keep = 1.0 - s.beta;
  for (double& e : e_theta) e *= keep;
  e_theta[obs] += s.beta;
  for (double& e : e_omega) e *= keep;
  e_omega[obs] += beta.grad(obs) * (s.v_theta - s.carried);
}

// Rebuild traces by replaying the stored history over [begin, end) with the
// current tables. If `seeded`, the window starts from a carried value that
// is treated as constant (gradient stops at the window edge); otherwise the
// first replayed step is an initialization step.
void replay_traces(const RvfRunState& st, std::size_t begin, bool seeded,
                   double seed_v, const ValueTable& theta,
                   const BetaView& beta, bool reward_adjusted,
                   std::vector<double>& e_theta,
                   std::vector<double>& e_omega) {
  std::fill(e_theta.begin(), e_theta.end(), 0.0);
  std::fill(e_omega.begin(), e_omega.end(), 0.0);
  double v = seed_v;
  for (std::size_t u = begin; u < st.history_obs.size(); ++u) {
    const bool first = !seeded && u == begin;
    const BlendOut s = blend_math(first, st.history_obs[u],
                                  st.history_reward[u], v, theta, beta,
                                  reward_adjusted);
    trace_step(first, st.history_obs[u], s, beta, e_theta, e_omega);
    v = s.v_beta;
  }
}

}  // namespace

double rvf_value(double beta_t, double v_t, double v_beta_prev) {
  if (!(beta_t >= 0.0 && beta_t <= 1.0))
    throw DomainError("blend weight must lie in [0, 1]");
  return beta_t * v_t + (1.0 - beta_t) * v_beta_prev;
}

RvfRunState init_run_state(int n_obs) {
  if (n_obs <= 0) throw TopologyError("run state needs n_obs > 0");
  RvfRunState st;
  st.e_theta.assign(n_obs, 0.0);
  st.e_omega.assign(n_obs, 0.0);
  return st;
}

void step_rvf(RvfRunState& state, int obs, double reward_in,
              const ValueTable& theta, const BetaView& beta,
              const RvfMode& mode) {
  const int n = theta.size();
  if (static_cast<int>(state.e_theta.size()) != n)
    throw DomainError("run state and value table sizes disagree");
  if (obs < 0 || obs >= n) throw DomainError("observation index out of range");
  if (mode.truncation == 0 || mode.truncation < -1)
    throw ConfigError("truncation must be >= 1 (or -1 for unlimited)");

  const bool first = state.t < 0;
  const BlendOut s = blend_math(first, obs, reward_in, state.v_beta, theta,
                                beta, mode.reward_adjusted);

  if (mode.grad == GradMode::Trace && mode.truncation < 0) {
    trace_step(first, obs, s, beta, state.e_theta, state.e_omega);
  }

  state.t += 1;
  state.v_beta = s.v_beta;
  state.prev_v_beta = s.carried;
  state.last_v_theta = s.v_theta;
  state.last_beta = s.beta;
  state.last_obs = obs;
  state.history_obs.push_back(obs);
  state.history_reward.push_back(reward_in);
  state.history_v_beta.push_back(s.v_beta);

  if (mode.grad == GradMode::ExactBPTT) {
    replay_traces(state, 0, false, 0.0, theta, beta, mode.reward_adjusted,
                  state.e_theta, state.e_omega);
  } else if (mode.truncation >= 1) {
    const std::size_t len = state.history_obs.size();
    const std::size_t window = static_cast<std::size_t>(mode.truncation);
    if (window >= len) {
      replay_traces(state, 0, false, 0.0, theta, beta, mode.reward_adjusted,
                    state.e_theta, state.e_omega);
    } else {
      const std::size_t begin = len - window;
      replay_traces(state, begin, true, state.history_v_beta[begin - 1],
                    theta, beta, mode.reward_adjusted, state.e_theta,
                    state.e_omega);
    }
  }
}

void step_rvf(RvfRunState& state, int obs, double reward_in,
              const ValueTable& theta, const EmphasisTable& emphasis,
              const RvfMode& mode) {
  step_rvf(state, obs, reward_in, theta, BetaView(emphasis), mode);
}

std::vector<double> lambda_returns(const std::vector<double>& rewards,
                                   const std::vector<double>& bootstrap,
                                   double gamma, double lambda) {
  if (bootstrap.size() != rewards.size() + 1)
    throw DomainError("bootstrap needs exactly one more entry than rewards");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw DomainError("lambda must lie in [0, 1]");
  const std::size_t horizon = rewards.size();
  std::vector<double> g(horizon);
  double tail = bootstrap[horizon];
  for (std::size_t t = horizon; t-- > 0;) {
    tail = rewards[t] +
           gamma * ((1.0 - lambda) * bootstrap[t + 1] + lambda * tail);
    g[t] = tail;
  }
  return g;
}

double compute_target(const TargetSpec& spec, const Trajectory& traj, int t,
                      const ValueTable& values, double gamma) {
  spec.validate();
  const int len = traj.length();
  if (t < 0 || t >= len) throw DomainError("step index outside the episode");

  // Value credited for the state after step u (the bootstrap); 0 past a
  // terminal, the table entry for the recorded final observation if the
  // recording was cut instead of finishing.
  auto boot_after = [&](int u) -> double {
    if (u + 1 < len) return values(traj.steps[u + 1].obs);
    return traj.terminated ? 0.0 : values(traj.final_obs);
  };

  switch (spec.kind) {
    case TargetKind::TD0:
      return traj.steps[t].reward + gamma * boot_after(t);
    case TargetKind::NStep: {
      double acc = 0.0, scale = 1.0;
      int u = t;
      for (int k = 0; k < spec.n && u < len; ++k, ++u) {
        acc += scale * traj.steps[u].reward;
        scale *= gamma;
      }
      return acc + scale * (u < len ? values(traj.steps[u].obs)
                                    : (traj.terminated
                                           ? 0.0
                                           : values(traj.final_obs)));
    }
    case TargetKind::LambdaReturn: {
      if (!traj.terminated)
        throw UnsupportedModeError(
            "a forward-view return needs the finished episode; this "
            "recording was cut mid-episode");
      double g = 0.0;  // value past the terminal
      for (int u = len - 1; u >= t; --u) {
        const double boot = u + 1 < len ? values(traj.steps[u + 1].obs) : 0.0;
        g = traj.steps[u].reward +
            gamma * ((1.0 - spec.lambda) * boot + spec.lambda * g);
      }
      return g;
    }
    case TargetKind::MonteCarlo: {
      if (!traj.terminated)
        throw UnsupportedModeError(
            "the Monte Carlo return needs the finished episode; this "
            "recording was cut mid-episode");
      double g = 0.0;
      for (int u = len - 1; u >= t; --u)
        g = traj.steps[u].reward + gamma * g;
      return g;
    }
  }
  throw DomainError("unknown target kind");
}

double beta_gradient_scalar(double target, double v_beta_t, double v_theta_t,
                            double v_beta_prev, double logit) {
  return (target - v_beta_t) * (v_theta_t - v_beta_prev) *
         sigmoid_grad(logit);
}

double rtd_update(ValueTable& theta, EmphasisTable& emphasis,
                  const RvfRunState& state, double target, double lr_theta,
                  double lr_omega, OmegaRule rule, double gating_c,
                  bool update_omega, int step_index) {
  if (state.t < 0)
    throw DomainError("cannot update before the first observation");

  const double delta = target - state.v_beta;
  if (!std::isfinite(delta) || std::fabs(delta) > kDivergenceCeiling)
    throw DivergenceError("TD error blew up" + step_tag(step_index),
                          step_index);

  const double scale = lr_theta * delta;
  const int n = theta.size();
  for (int j = 0; j < n; ++j) {
    const double e = state.e_theta[j];
    if (e == 0.0) continue;
    if (gating_c > 0.0 && std::fabs(e) < gating_c) continue;
    theta(j) += scale * e;
    if (!std::isfinite(theta(j)) || std::fabs(theta(j)) > kDivergenceCeiling)
      throw DivergenceError("value table blew up" + step_tag(step_index),
                            step_index);
  }

  if (update_omega) {
    if (rule == OmegaRule::OneStep) {
      const int o = state.last_obs;
      if (!(gating_c > 0.0 && std::fabs(state.e_theta[o]) < gating_c)) {
        const double g =
            beta_gradient_scalar(target, state.v_beta, state.last_v_theta,
                                 state.prev_v_beta, emphasis.logit(o));
        if (!std::isfinite(g) || std::fabs(g) > kDivergenceCeiling)
          throw DivergenceError("emphasis gradient blew up" +
                                    step_tag(step_index),
                                step_index);
        emphasis.omega[o] += lr_omega * g;
        if (!std::isfinite(emphasis.omega[o]) ||
            std::fabs(emphasis.omega[o]) > kDivergenceCeiling)
          throw DivergenceError("emphasis table blew up" +
                                    step_tag(step_index),
                                step_index);
      }
    } else {
      for (int j = 0; j < n; ++j) {
        const double e = state.e_omega[j];
        if (e == 0.0) continue;
        if (gating_c > 0.0 && std::fabs(state.e_theta[j]) < gating_c)
          continue;
        const double g = delta * e;
        if (!std::isfinite(g) || std::fabs(g) > kDivergenceCeiling)
          throw DivergenceError("emphasis gradient blew up" +
                                    step_tag(step_index),
                                step_index);
        emphasis.omega[j] += lr_omega * g;
        if (!std::isfinite(emphasis.omega[j]) ||
            std::fabs(emphasis.omega[j]) > kDivergenceCeiling)
          throw DivergenceError("emphasis table blew up" +
                                    step_tag(step_index),
                                step_index);
      }
    }
  }
  return delta;
}

void RtdConfig::validate(int n_obs) const {
  target.validate();
  if (!(lr_theta > 0.0)) throw ConfigError("value learning rate must be > 0");
  if (!(lr_omega > 0.0))
    throw ConfigError("emphasis learning rate must be > 0");
  if (!(gating_c >= 0.0 && gating_c < 1.0))
    throw ConfigError("gating threshold must lie in [0, 1)");
  if (mode.truncation == 0 || mode.truncation < -1)
    throw ConfigError("truncation must be >= 1 (or -1 for unlimited)");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (fixed_beta) {
    if (static_cast<int>(fixed_beta->size()) != n_obs)
      throw ConfigError("fixed beta assignment must cover every observation");
    for (double b : *fixed_beta)
      if (!(b >= 0.0 && b <= 1.0))
        throw ConfigError("fixed beta entries must lie in [0, 1]");
  }
}

std::vector<double> vbeta_sequence(const std::vector<int>& observations,
                                   const std::vector<double>& rewards_in,
                                   const ValueTable& theta,
                                   const BetaView& beta,
                                   const RvfMode& mode) {
  if (!rewards_in.empty() && rewards_in.size() != observations.size())
    throw DomainError("rewards_in must be empty or match the observations");
  std::vector<double> out;
  out.reserve(observations.size());
  double v = 0.0;
  for (std::size_t t = 0; t < observations.size(); ++t) {
    const double rin = rewards_in.empty() ? 0.0 : rewards_in[t];
    v = blend_math(t == 0, observations[t], rin, v, theta, beta,
                   mode.reward_adjusted)
            .v_beta;
    out.push_back(v);
  }
  return out;
}

EpisodeResult run_rtd_episode(const MarkovRewardProcess& mrp,
                              const ObservationMap& obs, ValueTable& theta,
                              EmphasisTable& emphasis, const RtdConfig& cfg,
                              Rng& rng) {
  cfg.validate(obs.n_obs);
  if (theta.size() != obs.n_obs || emphasis.size() != obs.n_obs)
    throw ConfigError("table sizes disagree with the observation space");

  EpisodeResult out;
  out.traj = sample_trajectory(mrp, obs, rng, cfg.max_steps);
  const int len = out.traj.length();
  if (len == 0) return out;  // started on a terminal

  const BetaView view =
      cfg.fixed_beta ? BetaView(*cfg.fixed_beta) : BetaView(emphasis);

  // Rewards collected on *entering* each visited state (0 for the start).
  std::vector<double> rewards_in(len, 0.0);
  for (int t = 1; t < len; ++t)
    rewards_in[t] = out.traj.steps[t - 1].reward;

  // Full-episode targets bootstrap the recurrent estimate itself: a no-update
  // pre-pass supplies v_beta per step, so the bootstrap for an aliased state
  // carries the branch context instead of the (shared) table entry.
  std::vector<double> offline_targets;
  if (cfg.target.needs_full_episode()) {
    if (!out.traj.terminated)
      throw UnsupportedModeError(
          "full-episode targets need a terminated episode; raise max_steps "
          "or pick a one-step target");
    std::vector<int> seq(len);
    for (int t = 0; t < len; ++t) seq[t] = out.traj.steps[t].obs;
    const auto pre = vbeta_sequence(seq, rewards_in, theta, view, cfg.mode);
    std::vector<double> rewards(len);
    std::vector<double> boot(len + 1, 0.0);
    for (int t = 0; t < len; ++t) {
      rewards[t] = out.traj.steps[t].reward;
      boot[t] = pre[t];
    }
    const double lam =
        cfg.target.kind == TargetKind::MonteCarlo ? 1.0 : cfg.target.lambda;
    offline_targets = lambda_returns(rewards, boot, mrp.gamma, lam);
  }

  RvfRunState st = init_run_state(obs.n_obs);
  out.deltas.reserve(len);
  out.betas.reserve(len);
  out.v_thetas.reserve(len);
  out.v_betas.reserve(len);
  for (int t = 0; t < len; ++t) {
    step_rvf(st, out.traj.steps[t].obs, rewards_in[t], theta, view, cfg.mode);
    const double target =
        cfg.target.needs_full_episode()
            ? offline_targets[t]
            : compute_target(cfg.target, out.traj, t, theta, mrp.gamma);
    const double delta =
        rtd_update(theta, emphasis, st, target, cfg.lr_theta, cfg.lr_omega,
                   cfg.omega_rule, cfg.gating_c,
                   /*update_omega=*/!cfg.fixed_beta.has_value(), t);
    out.deltas.push_back(delta);
    out.betas.push_back(st.last_beta);
    out.v_thetas.push_back(st.last_v_theta);
    out.v_betas.push_back(st.v_beta);
  }
  return out;
}

}  // namespace rvf
