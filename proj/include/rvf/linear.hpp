#pragma once

// Policy evaluation under linear function approximation with synthetic
// fixed features: TD(0), online TD(lambda), and the recurrent estimator
// with a sigmoid-linear emphasis head, compared by RMSVE against an oracle.

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "rvf/mrp.hpp"
#include "rvf/random.hpp"
#include "rvf/rvf_core.hpp"

namespace rvf {

struct FeatureMatrix {
  int n_states = 0;
  int k = 0;
  std::vector<double> phi;  // row-major, n_states x k

  const double* row(int s) const { return phi.data() + static_cast<std::size_t>(s) * k; }
  void validate() const;  // finite entries, no all-zero row
};

struct LinearValueFn {
  std::vector<double> w;

  double predict(const FeatureMatrix& f, int s) const {
    const double* p = f.row(s);
    double acc = 0.0;
    for (int j = 0; j < f.k; ++j) acc += p[j] * w[j];
    return acc;
  }
};

// Orthonormal cosine design: k columns of the DCT-II basis over n_states
// points (the identity when k == n_states). Full column rank by
// construction; this is the informative part of the synthetic features.
FeatureMatrix cosine_features(int n_states, int k);

// Dense ergodic chain plus features = cosine block + noise_level * Gaussian
// distractors; everything is a pure function of the seed.
std::pair<MarkovRewardProcess, FeatureMatrix> build_feature_mrp(
    int n_states, int k, std::uint64_t seed, double noise_level,
    double gamma = 0.9);

enum class LinearMethod { TD0, TDLambda, RVF };

struct LinearConfig {
  double lr = 0.005;        // TD(0) and recurrent value weights
  double lr_trace = 0.0005; // TD(lambda) weights
  double lr_beta = 0.005;   // emphasis weights
  double lambda = 0.9;
  int n_transitions = 5000;
  int eval_every = 100;
  OmegaRule omega_rule = OmegaRule::OneStep;
  std::optional<double> fixed_beta;  // force the blend weight (freezes w_beta)

  void validate() const;
};

struct RmsveCurve {
  std::vector<int> transitions;  // checkpoint axis, starting at 0
  std::vector<double> rmsve;
};

// Train one method on a single stream of n_transitions transitions and
// record RMSVE(predict, oracle over eval_states) at every checkpoint. All
// methods consume exactly one uniform draw per transition, so running them
// with equal seeds yields a paired comparison on identical streams.
RmsveCurve run_linear_policy_eval(LinearMethod method,
                                  const MarkovRewardProcess& mrp,
                                  const FeatureMatrix& features,
                                  const LinearConfig& cfg,
                                  const std::vector<int>& eval_states,
                                  const std::vector<double>& oracle_values,
                                  Rng& rng,
                                  LinearValueFn* final_value = nullptr);

// Frozen-parameter replay of the linear recurrent estimate along a state
// sequence. Returns the final smoothed value; optionally exposes its exact
// gradients w.r.t. the value weights and the emphasis weights (the trace
// recursions, which are exact when parameters do not move). `w_beta` is
// ignored when `fixed_beta` is set.
double linear_vbeta_replay(const FeatureMatrix& features,
                           const std::vector<int>& states,
                           const std::vector<double>& w,
                           const std::vector<double>& w_beta,
                           std::optional<double> fixed_beta,
                           std::vector<double>* grad_w = nullptr,
                           std::vector<double>* grad_w_beta = nullptr);

struct LinearComparison {
  std::vector<int> transitions;  // shared checkpoint axis
  // Indexed [replicate][checkpoint]; rows are paired across methods.
  std::vector<std::vector<double>> td0;
  std::vector<std::vector<double>> tdlambda;
  std::vector<std::vector<double>> rvf;
};

// Run all three methods over n_replicates independent streams (replicate r
// reuses the same derived seed for every method). Replicates run on a
// bounded worker pool; output is independent of scheduling.
LinearComparison run_linear_comparison(const MarkovRewardProcess& mrp,
                                       const FeatureMatrix& features,
                                       const LinearConfig& cfg,
                                       int n_replicates,
                                       std::uint64_t master_seed,
                                       int n_jobs = 0);

}  // namespace rvf
