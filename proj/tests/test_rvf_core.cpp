#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rvf/baselines.hpp"
#include "rvf/errors.hpp"
#include "rvf/mrp.hpp"
#include "rvf/random.hpp"
#include "rvf/rvf_core.hpp"

using namespace rvf;

namespace {

// Fresh state fed through the given observation stream.
RvfRunState feed(const std::vector<int>& obs_seq,
                 const std::vector<double>& rewards, const ValueTable& theta,
                 const BetaView& beta, const RvfMode& mode, int n_obs) {
  RvfRunState st = init_run_state(n_obs);
  for (std::size_t t = 0; t < obs_seq.size(); ++t)
    step_rvf(st, obs_seq[t], rewards[t], theta, beta, mode);
  return st;
}

}  // namespace

TEST_CASE("rvf_value blends and rejects bad weights") {
  CHECK(rvf_value(1.0, 3.7, -2.0) == 3.7);
  CHECK(rvf_value(0.0, 3.7, -2.0) == -2.0);
  CHECK(rvf_value(0.5, 2.0, 4.0) == 3.0);
  // Always inside the interval of its two arguments.
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double b = rng.unit();
    const double v = rng.uniform(-5, 5), prev = rng.uniform(-5, 5);
    const double out = rvf_value(b, v, prev);
    CHECK(out >= std::min(v, prev) - 1e-15);
    CHECK(out <= std::max(v, prev) + 1e-15);
  }
  CHECK_THROWS_AS(rvf_value(-0.1, 0.0, 0.0), DomainError);
  CHECK_THROWS_AS(rvf_value(1.1, 0.0, 0.0), DomainError);
}

TEST_CASE("initialization takes the first value and a one-hot trace") {
  ValueTable theta(4);
  theta(2) = 1.5;
  EmphasisTable emphasis(4, -3.0);  // beta far from 1; must not matter at t=0
  RvfRunState st = init_run_state(4);
  step_rvf(st, 2, 0.0, theta, emphasis);
  CHECK(st.t == 0);
  CHECK(st.v_beta == 1.5);
  CHECK(st.last_beta == 1.0);
  for (int o = 0; o < 4; ++o) {
    CHECK(st.e_theta[o] == (o == 2 ? 1.0 : 0.0));
    CHECK(st.e_omega[o] == 0.0);
  }
}

TEST_CASE("unrolling the recursion gives convex weights that sum to one") {
  const int n_obs = 6, len = 12;
  Rng rng(21);
  ValueTable theta(n_obs);
  EmphasisTable emphasis(n_obs);
  for (int o = 0; o < n_obs; ++o) {
    theta(o) = rng.uniform(-2, 2);
    emphasis.omega[o] = rng.uniform(-2, 2);
  }
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<int> obs(len);
    for (int t = 0; t < len; ++t) obs[t] = static_cast<int>(rng.below(n_obs));
    const std::vector<double> zeros(len, 0.0);
    const auto v = vbeta_sequence(obs, zeros, theta, BetaView(emphasis));

    // Position weights: w_t = beta_t, earlier w_i picks up every later
    // (1 - beta); position 0 keeps the leftover mass from initialization.
    std::vector<double> w(len, 0.0);
    double carry = 1.0;
    for (int t = len - 1; t >= 1; --t) {
      const double b = emphasis.beta(obs[t]);
      w[t] = b * carry;
      carry *= 1.0 - b;
    }
    w[0] = carry;
    double wsum = 0.0, blend = 0.0;
    for (int t = 0; t < len; ++t) {
      CHECK(w[t] >= 0.0);
      wsum += w[t];
      blend += w[t] * theta(obs[t]);
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(v.back() == doctest::Approx(blend).epsilon(1e-12));
  }
}

TEST_CASE("three-step trace carries the hand-computed coefficient") {
  // beta sequence (0.9, 0.1, 0.1) over distinct observations: the middle
  // observation's trace entry is 0.1 * 0.9 = 0.09 after the third step.
  ValueTable theta(3);
  theta.v = {1.0, -2.0, 0.5};
  const std::vector<double> fixed = {0.9, 0.1, 0.1};
  BetaView view(fixed);
  RvfRunState st = init_run_state(3);
  step_rvf(st, 0, 0.0, theta, view);
  step_rvf(st, 1, 0.0, theta, view);
  step_rvf(st, 2, 0.0, theta, view);
  CHECK(st.e_theta[1] == 0.1 * 0.9);
  CHECK(st.e_theta[0] == 0.9 * 0.9);
  CHECK(st.e_theta[2] == 0.1);
}

TEST_CASE("trace and exact replay agree while parameters are frozen") {
  const int n_obs = 5, len = 50;
  Rng rng(31);
  ValueTable theta(n_obs);
  EmphasisTable emphasis(n_obs);
  for (int o = 0; o < n_obs; ++o) {
    theta(o) = rng.uniform(-1, 1);
    emphasis.omega[o] = rng.uniform(-2, 2);
  }
  RvfMode trace_mode;  // defaults to running traces
  RvfMode replay_mode;
  replay_mode.grad = GradMode::ExactBPTT;
  RvfRunState a = init_run_state(n_obs), b = init_run_state(n_obs);
  for (int t = 0; t < len; ++t) {
    const int o = static_cast<int>(rng.below(n_obs));
    const double r = rng.uniform(-1, 1);
    step_rvf(a, o, r, theta, emphasis, trace_mode);
    step_rvf(b, o, r, theta, emphasis, replay_mode);
    CHECK(a.v_beta == b.v_beta);
    for (int j = 0; j < n_obs; ++j) {
      CHECK(a.e_theta[j] == b.e_theta[j]);
      CHECK(a.e_omega[j] == b.e_omega[j]);
    }
  }
}

TEST_CASE("truncation keeps only the last N observations in the trace") {
  const int n_obs = 6;
  Rng rng(41);
  ValueTable theta(n_obs);
  EmphasisTable emphasis(n_obs);
  for (int o = 0; o < n_obs; ++o) {
    theta(o) = rng.uniform(-1, 1);
    emphasis.omega[o] = rng.uniform(-1.5, 1.5);
  }
  const std::vector<int> obs = {0, 1, 2, 3, 4, 5};
  const std::vector<double> zeros(obs.size(), 0.0);

  RvfMode one;
  one.truncation = 1;
  RvfRunState st1 = feed(obs, zeros, theta, BetaView(emphasis), one, n_obs);
  // Window of one: only the current step's deposit survives.
  for (int j = 0; j < n_obs; ++j) {
    const double expect_theta = (j == 5) ? emphasis.beta(5) : 0.0;
    CHECK(st1.e_theta[j] == doctest::Approx(expect_theta).epsilon(1e-15));
    if (j != 5) CHECK(st1.e_omega[j] == 0.0);
  }

  RvfMode two;
  two.truncation = 2;
  RvfRunState st2 = feed(obs, zeros, theta, BetaView(emphasis), two, n_obs);
  const double b5 = emphasis.beta(5), b4 = emphasis.beta(4);
  CHECK(st2.e_theta[5] == doctest::Approx(b5).epsilon(1e-15));
  CHECK(st2.e_theta[4] == doctest::Approx((1 - b5) * b4).epsilon(1e-15));
  CHECK(st2.e_theta[3] == 0.0);

  // A window at least as long as the history is the full exact gradient.
  RvfMode wide;
  wide.truncation = 64;
  RvfMode exact;
  exact.grad = GradMode::ExactBPTT;
  RvfRunState sw = feed(obs, zeros, theta, BetaView(emphasis), wide, n_obs);
  RvfRunState se = feed(obs, zeros, theta, BetaView(emphasis), exact, n_obs);
  for (int j = 0; j < n_obs; ++j) {
    CHECK(sw.e_theta[j] == se.e_theta[j]);
    CHECK(sw.e_omega[j] == se.e_omega[j]);
  }
}

TEST_CASE("exact traces match central finite differences") {
  const int n_obs = 7, len = 20;
  Rng rng(51);
  for (int rep = 0; rep < 5; ++rep) {
    ValueTable theta(n_obs);
    EmphasisTable emphasis(n_obs);
    for (int o = 0; o < n_obs; ++o) {
      theta(o) = rng.uniform(-1, 1);
      emphasis.omega[o] = rng.uniform(-2, 2);
    }
    std::vector<int> obs(len);
    std::vector<double> rewards(len);
    for (int t = 0; t < len; ++t) {
      obs[t] = static_cast<int>(rng.below(n_obs));
      rewards[t] = rng.uniform(-1, 1);
    }
    RvfMode mode;
    mode.grad = GradMode::ExactBPTT;
    mode.reward_adjusted = (rep % 2 == 1);
    RvfRunState st = feed(obs, rewards, theta, BetaView(emphasis), mode, n_obs);

    const double h = 1e-5;
    for (int j = 0; j < n_obs; ++j) {
      ValueTable tp = theta, tm = theta;
      tp(j) += h;
      tm(j) -= h;
      const double fd =
          (vbeta_sequence(obs, rewards, tp, BetaView(emphasis), mode).back() -
           vbeta_sequence(obs, rewards, tm, BetaView(emphasis), mode).back()) /
          (2 * h);
      const double rel = std::fabs(fd - st.e_theta[j]) /
                         std::max(std::fabs(fd), 1e-3);
      CHECK(rel < 1e-6);

      EmphasisTable ep = emphasis, em = emphasis;
      ep.omega[j] += h;
      em.omega[j] -= h;
      const double fdw =
          (vbeta_sequence(obs, rewards, theta, BetaView(ep), mode).back() -
           vbeta_sequence(obs, rewards, theta, BetaView(em), mode).back()) /
          (2 * h);
      const double relw = std::fabs(fdw - st.e_omega[j]) /
                          std::max(std::fabs(fdw), 1e-3);
      CHECK(relw < 1e-6);
    }
  }
}

TEST_CASE("lambda returns interpolate between one-step and Monte Carlo") {
  const Ychain c = build_ychain(4, 0.9, 2);
  ValueTable theta(c.obs.n_obs);
  Rng rng(61);
  for (int o = 0; o < theta.size(); ++o) theta(o) = rng.uniform(-1, 1);

  for (int ep = 0; ep < 20; ++ep) {
    const Trajectory traj = sample_trajectory(c.mrp, c.obs, rng, 100);
    REQUIRE(traj.terminated);
    const int len = traj.length();

    TargetSpec td0{TargetKind::TD0, 1, 0.9};
    TargetSpec lam0{TargetKind::LambdaReturn, 1, 0.0};
    TargetSpec lam1{TargetKind::LambdaReturn, 1, 1.0};
    TargetSpec mc{TargetKind::MonteCarlo, 1, 0.9};
    for (int t = 0; t < len; ++t) {
      CHECK(compute_target(lam0, traj, t, theta, c.mrp.gamma) ==
            compute_target(td0, traj, t, theta, c.mrp.gamma));
      CHECK(compute_target(lam1, traj, t, theta, c.mrp.gamma) ==
            compute_target(mc, traj, t, theta, c.mrp.gamma));
    }
    // Full return from k steps before the terminal is gamma^k * (+-1).
    const double last = traj.steps.back().reward;
    for (int t = 0; t < len; ++t) {
      const double expect = std::pow(0.9, len - 1 - t) * last;
      CHECK(compute_target(mc, traj, t, theta, c.mrp.gamma) ==
            doctest::Approx(expect).epsilon(1e-12));
    }
    // Terminal step: no bootstrap, every target is the entering reward.
    TargetSpec n3{TargetKind::NStep, 3, 0.9};
    for (const TargetSpec& spec : {td0, lam0, lam1, mc, n3})
      CHECK(compute_target(spec, traj, len - 1, theta, c.mrp.gamma) == last);
  }
}

TEST_CASE("n-step target matches the hand expansion") {
  const Ychain c = build_ychain(4, 0.9);
  ValueTable theta(c.obs.n_obs);
  Rng rng(71);
  for (int o = 0; o < theta.size(); ++o) theta(o) = rng.uniform(-1, 1);
  const Trajectory traj = sample_trajectory(c.mrp, c.obs, rng, 100);
  REQUIRE(traj.terminated);
  REQUIRE(traj.length() >= 4);
  TargetSpec n2{TargetKind::NStep, 2, 0.9};
  const double expect = traj.steps[0].reward +
                        0.9 * traj.steps[1].reward +
                        0.81 * theta(traj.steps[2].obs);
  CHECK(compute_target(n2, traj, 0, theta, c.mrp.gamma) ==
        doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("forward-view targets on an unfinished episode are refused") {
  const Ychain c = build_ychain(3, 0.9, 6);
  ValueTable theta(c.obs.n_obs);
  Rng rng(81);
  const Trajectory cut = sample_trajectory(c.mrp, c.obs, rng, 3);
  REQUIRE_FALSE(cut.terminated);
  TargetSpec lam{TargetKind::LambdaReturn, 1, 0.9};
  TargetSpec mc{TargetKind::MonteCarlo, 1, 0.9};
  TargetSpec td0{TargetKind::TD0, 1, 0.9};
  CHECK_THROWS_AS(compute_target(lam, cut, 0, theta, 0.9),
                  UnsupportedModeError);
  CHECK_THROWS_AS(compute_target(mc, cut, 1, theta, 0.9),
                  UnsupportedModeError);
  // One-step and n-step bootstrap from the cut point instead of throwing.
  CHECK_NOTHROW(compute_target(td0, cut, 2, theta, 0.9));
  CHECK_THROWS_AS(compute_target(td0, cut, 3, theta, 0.9), DomainError);
}

TEST_CASE("zero error leaves both tables untouched") {
  ValueTable theta(3);
  theta.v = {0.4, -0.2, 0.9};
  EmphasisTable emphasis(3, 0.25);
  RvfRunState st = init_run_state(3);
  step_rvf(st, 1, 0.0, theta, emphasis);
  step_rvf(st, 2, 0.0, theta, emphasis);
  const ValueTable theta_before = theta;
  const EmphasisTable emph_before = emphasis;
  const double delta =
      rtd_update(theta, emphasis, st, st.v_beta, 0.5, 1.0);
  CHECK(delta == 0.0);
  CHECK(theta.v == theta_before.v);
  CHECK(emphasis.omega == emph_before.omega);
}

TEST_CASE("constant-target updates approach geometrically") {
  // One observation, beta pinned to 1: theta_k = g * (1 - (1-lr)^k).
  const double g = 2.5, lr = 0.3;
  ValueTable theta(1);
  EmphasisTable emphasis(1);
  const std::vector<double> ones = {1.0};
  for (int k = 1; k <= 25; ++k) {
    RvfRunState st = init_run_state(1);
    step_rvf(st, 0, 0.0, theta, BetaView(ones));
    rtd_update(theta, emphasis, st, g, lr, 1.0);
    const double expect = g * (1.0 - std::pow(1.0 - lr, k));
    CHECK(theta(0) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("divergence guard reports the offending step") {
  ValueTable theta(2);
  EmphasisTable emphasis(2);
  RvfRunState st = init_run_state(2);
  step_rvf(st, 0, 0.0, theta, emphasis);
  step_rvf(st, 1, 0.0, theta, emphasis);
  try {
    rtd_update(theta, emphasis, st, 1e12, 0.5, 1.0, OmegaRule::Recursive, 0.0,
               true, 7);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == 7);
    CHECK(std::string(e.what()).find("blew up") != std::string::npos);
  }
}

TEST_CASE("gating skips trace components below the threshold") {
  ValueTable theta(3);
  theta.v = {1.0, 2.0, 3.0};
  EmphasisTable emphasis(3);  // beta = 0.5 everywhere
  RvfRunState st = init_run_state(3);
  step_rvf(st, 0, 0.0, theta, emphasis);
  step_rvf(st, 1, 0.0, theta, emphasis);
  step_rvf(st, 2, 0.0, theta, emphasis);
  // e_theta = (0.25, 0.25, 0.5); gate at 0.3 so only obs 2 may move.
  REQUIRE(st.e_theta[0] == 0.25);
  REQUIRE(st.e_theta[1] == 0.25);
  REQUIRE(st.e_theta[2] == 0.5);
  const ValueTable before = theta;
  rtd_update(theta, emphasis, st, st.v_beta + 1.0, 0.5, 1.0,
             OmegaRule::Recursive, 0.3);
  CHECK(theta(0) == before(0));
  CHECK(theta(1) == before(1));
  CHECK(theta(2) != before(2));
}

TEST_CASE("pinned beta = 1 reproduces the TD(0) baseline bit for bit") {
  const Ychain c = build_ychain(3, 0.9);
  const int n_obs = c.obs.n_obs;
  ValueTable table_td(n_obs), table_rtd(n_obs);
  EmphasisTable emphasis(n_obs);
  RtdConfig cfg;
  cfg.target.kind = TargetKind::TD0;
  cfg.lr_theta = 0.5;
  cfg.fixed_beta = std::vector<double>(n_obs, 1.0);
  cfg.max_steps = 100;
  Rng rng_td(555), rng_rtd(555);
  for (int ep = 0; ep < 200; ++ep) {
    td0_episode(c.mrp, c.obs, table_td, 0.5, rng_td, 100);
    run_rtd_episode(c.mrp, c.obs, table_rtd, emphasis, cfg, rng_rtd);
    for (int o = 0; o < n_obs; ++o) CHECK(table_td(o) == table_rtd(o));
  }
  // The emphasis table was declared fixed and must never have moved.
  for (int o = 0; o < n_obs; ++o) CHECK(emphasis.omega[o] == 0.0);
}

TEST_CASE("one-step emphasis gradient obeys the sign table") {
  // (target - v_beta) and (v_theta - prev) agree in sign -> beta grows.
  CHECK(beta_gradient_scalar(1.0, 0.5, 2.0, 0.0, 0.3) > 0.0);
  CHECK(beta_gradient_scalar(1.0, 0.5, -2.0, 0.0, 0.3) < 0.0);
  CHECK(beta_gradient_scalar(-1.0, 0.5, 2.0, 0.0, 0.3) < 0.0);
  CHECK(beta_gradient_scalar(-1.0, 0.5, -2.0, 0.0, 0.3) > 0.0);
  CHECK(beta_gradient_scalar(1.0, 0.5, 0.7, 0.7, 0.3) == 0.0);
}

TEST_CASE("reward-adjusted recursion subtracts the incoming reward") {
  ValueTable theta(2);
  theta.v = {2.0, -1.0};
  const std::vector<double> fixed = {0.5, 0.25};
  RvfMode mode;
  mode.reward_adjusted = true;
  RvfRunState st = init_run_state(2);
  step_rvf(st, 0, 0.7, theta, BetaView(fixed), mode);  // init ignores reward
  CHECK(st.v_beta == 2.0);
  step_rvf(st, 1, 0.3, theta, BetaView(fixed), mode);
  // carried = 2.0 - 0.3; v = 0.25 * (-1) + 0.75 * 1.7
  CHECK(st.v_beta == doctest::Approx(0.25 * -1.0 + 0.75 * 1.7).epsilon(1e-15));
}

TEST_CASE("config validation catches bad settings") {
  RtdConfig cfg;
  cfg.lr_theta = 0.0;
  CHECK_THROWS_AS(cfg.validate(4), ConfigError);
  cfg = RtdConfig{};
  cfg.gating_c = 1.0;
  CHECK_THROWS_AS(cfg.validate(4), ConfigError);
  cfg = RtdConfig{};
  cfg.mode.truncation = 0;
  CHECK_THROWS_AS(cfg.validate(4), ConfigError);
  cfg = RtdConfig{};
  cfg.fixed_beta = std::vector<double>{1.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(4), ConfigError);
  cfg = RtdConfig{};
  cfg.fixed_beta = std::vector<double>{0.5, 0.5, 0.5, 1.5};
  CHECK_THROWS_AS(cfg.validate(4), ConfigError);
  cfg = RtdConfig{};
  cfg.target.lambda = 1.5;
  CHECK_THROWS_AS(cfg.validate(4), ConfigError);
  cfg = RtdConfig{};
  CHECK_NOTHROW(cfg.validate(4));
}

TEST_CASE("episode runner records blends and refuses impossible targets") {
  const Ychain c = build_ychain(3, 0.9);
  const int n_obs = c.obs.n_obs;
  ValueTable theta(n_obs);
  EmphasisTable emphasis(n_obs);

  std::vector<double> fixed(n_obs, 0.0);
  fixed[c.obs(c.layout.junction)] = 1.0;
  fixed[c.obs(c.layout.top_entry)] = 1.0;
  fixed[c.obs(c.layout.bottom_entry)] = 1.0;
  RtdConfig cfg;
  cfg.target.kind = TargetKind::LambdaReturn;
  cfg.fixed_beta = fixed;
  cfg.max_steps = 100;
  Rng rng(91);
  const EpisodeResult res =
      run_rtd_episode(c.mrp, c.obs, theta, emphasis, cfg, rng);
  REQUIRE(res.traj.terminated);
  REQUIRE(res.betas.size() == static_cast<std::size_t>(res.traj.length()));
  CHECK(res.betas[0] == 1.0);  // initialization acts like a full blend
  for (int t = 1; t < res.traj.length(); ++t)
    CHECK(res.betas[t] == fixed[res.traj.steps[t].obs]);

  // A forward-view target cannot be computed if the episode never finishes.
  const Ychain longchain = build_ychain(3, 0.9, 50);
  ValueTable th2(longchain.obs.n_obs);
  EmphasisTable em2(longchain.obs.n_obs);
  RtdConfig cut = cfg;
  cut.fixed_beta.reset();
  cut.max_steps = 4;
  Rng rng2(92);
  CHECK_THROWS_AS(
      run_rtd_episode(longchain.mrp, longchain.obs, th2, em2, cut, rng2),
      UnsupportedModeError);
}

TEST_CASE("episode runner aborts cleanly when the rates are absurd") {
  const Ychain c = build_ychain(3, 0.9);
  ValueTable theta(c.obs.n_obs);
  EmphasisTable emphasis(c.obs.n_obs);
  RtdConfig cfg;
  cfg.target.kind = TargetKind::TD0;
  cfg.lr_theta = 1e9;
  cfg.max_steps = 100;
  Rng rng(93);
  bool threw = false;
  for (int ep = 0; ep < 50 && !threw; ++ep) {
    try {
      run_rtd_episode(c.mrp, c.obs, theta, emphasis, cfg, rng);
    } catch (const DivergenceError& e) {
      threw = true;
      CHECK(e.step() >= 0);
    }
  }
  CHECK(threw);
}
