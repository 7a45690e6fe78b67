#pragma once

// The recurrent value estimate and its learning rules.
//
// Along a trajectory the estimate is an exponential smoothing of the
// per-observation values,
//
//   v_beta(0) = V(o_0)
//   v_beta(t) = beta(o_t) * V(o_t) + (1 - beta(o_t)) * v_beta(t-1),
//
// so the value carried into an aliased state can come from the (fully
// observed) states before it. Both parameter tables are learned from the
// TD-style error  delta = target - v_beta  by semi-gradient: the target is
// treated as a constant, the estimate side is differentiated either with
// running traces or by replaying the recursion over the stored prefix.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rvf/errors.hpp"
#include "rvf/mrp.hpp"
#include "rvf/random.hpp"
#include "rvf/tables.hpp"

namespace rvf {

// How the gradient of v_beta w.r.t. the tables is obtained.
//   Trace:     running traces, updated in O(n_obs) per step. With a
//              truncation window N the trace is rebuilt from the last N
//              observations instead (a hard stop on effective history).
//   ExactBPTT: replay the whole stored prefix with the current tables.
// With parameters frozen within an episode the two coincide exactly; they
// differ only because traces keep coefficients computed from past table
// contents while replay re-reads the tables.
enum class GradMode { Trace, ExactBPTT };

// Which omega update the episode runner applies.
//   OneStep:   only the current step's blend is differentiated
//              (the simple tabular rule).
//   Recursive: the full e_omega trace, mirroring the theta side.
enum class OmegaRule { OneStep, Recursive };

enum class TargetKind { TD0, NStep, LambdaReturn, MonteCarlo };

struct TargetSpec {
  TargetKind kind = TargetKind::TD0;
  int n = 1;            // NStep horizon
  double lambda = 0.9;  // LambdaReturn mixing

  void validate() const {
    if (n < 1) throw ConfigError("n-step target needs n >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw ConfigError("lambda must lie in [0, 1]");
  }
  bool needs_full_episode() const {
    return kind == TargetKind::LambdaReturn || kind == TargetKind::MonteCarlo;
  }
};

// Where beta comes from: the sigmoid of learned logits, or a fixed
// per-observation assignment (which may sit exactly at 0 or 1, values a
// finite logit can only approach). Fixed assignments have zero gradient.
class BetaView {
 public:
  explicit BetaView(const EmphasisTable& e) : emphasis_(&e) {}
  explicit BetaView(const std::vector<double>& fixed) : fixed_(&fixed) {}

  double beta(int obs) const {
    return fixed_ ? (*fixed_)[obs] : emphasis_->beta(obs);
  }
  // d beta / d omega at this observation; 0 for fixed assignments.
  double grad(int obs) const {
    return fixed_ ? 0.0 : emphasis_->beta_grad(obs);
  }
  bool learned() const { return fixed_ == nullptr; }

 private:
  const EmphasisTable* emphasis_ = nullptr;
  const std::vector<double>* fixed_ = nullptr;
};

// One convex-combination step of the recursion.
double rvf_value(double beta_t, double v_t, double v_beta_prev);

struct RvfMode {
  GradMode grad = GradMode::Trace;
  int truncation = -1;          // >= 1 caps effective history; -1 = unlimited
  bool reward_adjusted = false; // carry (v_beta_prev - r) into the blend
};

// Per-episode state of the recurrent estimate. Traces are dense over
// observations; `history` stores (obs, incoming reward) for replay modes.
struct RvfRunState {
  int t = -1;  // index of the last observed step; -1 before the first
  double v_beta = 0.0;
  double prev_v_beta = 0.0;   // the value the last blend carried forward
  double last_v_theta = 0.0;  // V(o_t) at the last step
  double last_beta = 1.0;     // blend weight applied (1 at initialization)
  int last_obs = -1;
  std::vector<double> e_theta;
  std::vector<double> e_omega;
  std::vector<int> history_obs;
  std::vector<double> history_reward;
  std::vector<double> history_v_beta;  // forward value after each step
};

RvfRunState init_run_state(int n_obs);

// Feed the next observation (with the reward collected on entering it)
// through the recursion and refresh the gradient traces per `mode`.
void step_rvf(RvfRunState& state, int obs, double reward_in,
              const ValueTable& theta, const BetaView& beta,
              const RvfMode& mode = {});

// Convenience overload for the learned-beta case.
void step_rvf(RvfRunState& state, int obs, double reward_in,
              const ValueTable& theta, const EmphasisTable& emphasis,
              const RvfMode& mode = {});

// Forward-view mixed returns over a whole episode:
//   g[t] = r[t] + gamma * ((1 - lambda) * bootstrap[t+1] + lambda * g[t+1])
// with g[T] = bootstrap[T]. `bootstrap` has one more entry than `rewards`;
// its last entry is the value credited past the recorded steps (0 after
// termination). lambda = 0 gives one-step targets, lambda = 1 the full
// return.
std::vector<double> lambda_returns(const std::vector<double>& rewards,
                                   const std::vector<double>& bootstrap,
                                   double gamma, double lambda);

// Target for step t of a recorded episode, bootstrapping from `values`.
// LambdaReturn and MonteCarlo are forward views over the remaining episode
// and are only defined once it has terminated; asking for them on a
// truncated recording throws UnsupportedModeError.
double compute_target(const TargetSpec& spec, const Trajectory& traj, int t,
                      const ValueTable& values, double gamma);

// Apply the semi-gradient update for the step the run state currently
// sits on:  theta += lr_theta * delta * e_theta  and, if `update_omega`,
// the omega rule of choice. Trace components smaller in magnitude than
// `gating_c` are skipped (0 disables gating). Returns delta. Non-finite or
// exploding quantities throw DivergenceError carrying `step_index`.
double rtd_update(ValueTable& theta, EmphasisTable& emphasis,
                  const RvfRunState& state, double target, double lr_theta,
                  double lr_omega, OmegaRule rule = OmegaRule::OneStep,
                  double gating_c = 0.0, bool update_omega = true,
                  int step_index = -1);

// The one-step ascent direction on the emphasis logit,
//   (target - v_beta_t) * (v_theta_t - v_beta_prev) * sigmoid'(logit).
// Positive exactly when both error factors share a sign: the logit grows
// (more weight on the present) iff trusting V(o_t) more would have moved
// v_beta toward the target.
double beta_gradient_scalar(double target, double v_beta_t, double v_theta_t,
                            double v_beta_prev, double logit);

struct RtdConfig {
  TargetSpec target;
  double lr_theta = 0.5;
  double lr_omega = 1.0;
  RvfMode mode;
  // The recursive rule credits omega through the inherited trace, which is
  // what makes the learned emphasis settle on aliased chains; the one-step
  // rule is simpler but can see-saw against the value table there.
  OmegaRule omega_rule = OmegaRule::Recursive;
  double gating_c = 0.0;
  // Per-observation beta override; when set, omega is never updated.
  std::optional<std::vector<double>> fixed_beta;
  int max_steps = 10000;

  void validate(int n_obs) const;
};

struct EpisodeResult {
  Trajectory traj;
  std::vector<double> deltas;
  std::vector<double> betas;     // blend weight applied at each step
  std::vector<double> v_thetas;  // V(o_t) before the step's update
  std::vector<double> v_betas;   // recurrent estimate after the blend
};

// Sample one episode and run the per-step learning loop over it. One-step
// targets are computed live against the current table; full-episode targets
// (lambda return, Monte Carlo) are precomputed from a no-update pre-pass of
// the recurrent estimate over the episode, so the bootstrap carries the
// same context the estimate itself had.
EpisodeResult run_rtd_episode(const MarkovRewardProcess& mrp,
                              const ObservationMap& obs, ValueTable& theta,
                              EmphasisTable& emphasis, const RtdConfig& cfg,
                              Rng& rng);

// Recurrent estimate along a fixed observation sequence with frozen tables
// (no learning); rewards enter only in reward-adjusted mode. Used for
// evaluation and as the pre-pass for full-episode targets.
std::vector<double> vbeta_sequence(const std::vector<int>& observations,
                                   const std::vector<double>& rewards_in,
                                   const ValueTable& theta,
                                   const BetaView& beta,
                                   const RvfMode& mode = {});

}  // namespace rvf
