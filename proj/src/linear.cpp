#include "rvf/linear.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "rvf/errors.hpp"
#include "rvf/parallel.hpp"
#include "rvf/tables.hpp"

namespace rvf {

namespace {

constexpr double kDivergenceCeiling = 1e8;

void guard(double x, const char* what, int step) {
  if (!std::isfinite(x) || std::fabs(x) > kDivergenceCeiling) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s blew up at transition %d", what, step);
    throw DivergenceError(buf, step);
  }
}

double dot(const double* a, const std::vector<double>& b, int k) {
  double acc = 0.0;
  for (int j = 0; j < k; ++j) acc += a[j] * b[j];
  return acc;
}

}  // namespace

void FeatureMatrix::validate() const {
  if (n_states <= 0 || k <= 0 ||
      phi.size() != static_cast<std::size_t>(n_states) * k)
    throw DomainError("feature matrix shape is inconsistent");
  for (int s = 0; s < n_states; ++s) {
    bool all_zero = true;
    for (int j = 0; j < k; ++j) {
      const double x = row(s)[j];
      if (!std::isfinite(x)) throw DomainError("non-finite feature entry");
      if (x != 0.0) all_zero = false;
    }
    if (all_zero)
      throw DomainError("state " + std::to_string(s) + " has all-zero features");
  }
}

FeatureMatrix cosine_features(int n_states, int k) {
  if (k < 1 || k > n_states)
    throw DomainError("need 1 <= k <= n_states feature columns");
  FeatureMatrix f;
  f.n_states = n_states;
  f.k = k;
  f.phi.assign(static_cast<std::size_t>(n_states) * k, 0.0);
  if (k == n_states) {
    for (int s = 0; s < n_states; ++s)
      f.phi[static_cast<std::size_t>(s) * k + s] = 1.0;
    return f;
  }
  const double pi = std::acos(-1.0);
  for (int s = 0; s < n_states; ++s)
    for (int j = 0; j < k; ++j) {
      const double scale =
          j == 0 ? std::sqrt(1.0 / n_states) : std::sqrt(2.0 / n_states);
      f.phi[static_cast<std::size_t>(s) * k + j] =
          scale * std::cos(pi * (s + 0.5) * j / n_states);
    }
  return f;
}

std::pair<MarkovRewardProcess, FeatureMatrix> build_feature_mrp(
    int n_states, int k, std::uint64_t seed, double noise_level,
    double gamma) {
  if (!(noise_level >= 0.0))
    throw DomainError("noise_level must be nonnegative");
  MarkovRewardProcess mrp =
      build_random_mrp(n_states, derive_seed(seed, 0xC0A1), -1.0, 1.0, gamma);
  FeatureMatrix f = cosine_features(n_states, k);
  if (noise_level > 0.0) {
    Rng rng(derive_seed(seed, 0xFEA7));
    for (double& x : f.phi) x += noise_level * rng.normal();
  }
  f.validate();
  return {std::move(mrp), std::move(f)};
}

void LinearConfig::validate() const {
  if (!(lr > 0.0) || !(lr_trace > 0.0) || !(lr_beta > 0.0))
    throw ConfigError("learning rates must be > 0");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ConfigError("lambda must lie in [0, 1]");
  if (n_transitions < 1) throw ConfigError("n_transitions must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (fixed_beta && !(*fixed_beta >= 0.0 && *fixed_beta <= 1.0))
    throw ConfigError("fixed beta must lie in [0, 1]");
}

RmsveCurve run_linear_policy_eval(LinearMethod method,
                                  const MarkovRewardProcess& mrp,
                                  const FeatureMatrix& features,
                                  const LinearConfig& cfg,
                                  const std::vector<int>& eval_states,
                                  const std::vector<double>& oracle_values,
                                  Rng& rng, LinearValueFn* final_value) {
  cfg.validate();
  features.validate();
  if (features.n_states != mrp.n_states)
    throw ConfigError("feature matrix does not cover the chain's states");
  if (static_cast<int>(oracle_values.size()) != mrp.n_states)
    throw ConfigError("oracle values must have one entry per state");
  if (eval_states.empty())
    throw ConfigError("need at least one evaluation state");
  for (int s : eval_states)
    if (s < 0 || s >= mrp.n_states)
      throw ConfigError("evaluation state out of range");

  const int k = features.k;
  std::vector<double> w(k, 0.0);        // value weights
  std::vector<double> w_beta(k, 0.0);   // emphasis weights (blend = 0.5 at 0)
  std::vector<double> z(k, 0.0);        // accumulating trace (TDLambda)
  std::vector<double> e_w(k, 0.0);      // recurrent value trace (RVF)
  std::vector<double> e_wb(k, 0.0);     // recurrent emphasis trace (RVF)

  auto rmsve = [&] {
    double acc = 0.0;
    for (int s : eval_states) {
      const double err = dot(features.row(s), w, k) - oracle_values[s];
      acc += err * err;
    }
    return std::sqrt(acc / eval_states.size());
  };

  RmsveCurve curve;
  curve.transitions.push_back(0);
  curve.rmsve.push_back(rmsve());

  const double trace_decay = mrp.gamma * cfg.lambda;
  double v_beta = 0.0;   // recurrent estimate, reset at episode boundaries
  bool fresh = true;     // next visit initializes the recurrence / traces
  int s = mrp.start_state;
  for (int t = 0; t < cfg.n_transitions; ++t) {
    const double* phi = features.row(s);
    const int next = sample_next_state(mrp, s, rng);
    const double boot =
        mrp.is_terminal(next) ? 0.0 : dot(features.row(next), w, k);
    const double target = mrp.reward[next] + mrp.gamma * boot;

    switch (method) {
      case LinearMethod::TD0: {
        const double delta = target - dot(phi, w, k);
        guard(delta, "TD error", t);
        for (int j = 0; j < k; ++j) {
          w[j] += cfg.lr * delta * phi[j];
          guard(w[j], "weights", t);
        }
        break;
      }
      case LinearMethod::TDLambda: {
        const double delta = target - dot(phi, w, k);
        guard(delta, "TD error", t);
        if (fresh) std::fill(z.begin(), z.end(), 0.0);
        for (int j = 0; j < k; ++j) z[j] = trace_decay * z[j] + phi[j];
        for (int j = 0; j < k; ++j) {
          if (z[j] == 0.0) continue;
          w[j] += cfg.lr_trace * delta * z[j];
          guard(w[j], "weights", t);
        }
        break;
      }
      case LinearMethod::RVF: {
        const double v_theta = dot(phi, w, k);
        const double logit = dot(phi, w_beta, k);
        const double b = fresh ? 1.0
                               : (cfg.fixed_beta ? *cfg.fixed_beta
                                                 : sigmoid(logit));
        const double carried = v_beta;
        if (fresh) {
          v_beta = v_theta;
          for (int j = 0; j < k; ++j) e_w[j] = phi[j];
          std::fill(e_wb.begin(), e_wb.end(), 0.0);
        } else {
          v_beta = b * v_theta + (1.0 - b) * carried;
          const double keep = 1.0 - b;
          for (int j = 0; j < k; ++j) e_w[j] = b * phi[j] + keep * e_w[j];
          if (!cfg.fixed_beta) {
            const double slope = sigmoid_grad(logit) * (v_theta - carried);
            for (int j = 0; j < k; ++j)
              e_wb[j] = slope * phi[j] + keep * e_wb[j];
          }
        }
        const double delta = target - v_beta;
        guard(delta, "TD error", t);
        for (int j = 0; j < k; ++j) {
          if (e_w[j] == 0.0) continue;
          w[j] += cfg.lr * delta * e_w[j];
          guard(w[j], "weights", t);
        }
        if (!cfg.fixed_beta && !fresh) {
          if (cfg.omega_rule == OmegaRule::OneStep) {
            const double slope =
                delta * sigmoid_grad(logit) * (v_theta - carried);
            for (int j = 0; j < k; ++j) {
              w_beta[j] += cfg.lr_beta * slope * phi[j];
              guard(w_beta[j], "emphasis weights", t);
            }
          } else {
            for (int j = 0; j < k; ++j) {
              w_beta[j] += cfg.lr_beta * delta * e_wb[j];
              guard(w_beta[j], "emphasis weights", t);
            }
          }
        }
        break;
      }
    }

    fresh = mrp.is_terminal(next);
    s = fresh ? mrp.start_state : next;
    if ((t + 1) % cfg.eval_every == 0 || t + 1 == cfg.n_transitions) {
      if (curve.transitions.back() != t + 1) {
        curve.transitions.push_back(t + 1);
        curve.rmsve.push_back(rmsve());
      }
    }
  }

  if (final_value) final_value->w = w;
  return curve;
}

double linear_vbeta_replay(const FeatureMatrix& features,
                           const std::vector<int>& states,
                           const std::vector<double>& w,
                           const std::vector<double>& w_beta,
                           std::optional<double> fixed_beta,
                           std::vector<double>* grad_w,
                           std::vector<double>* grad_w_beta) {
  features.validate();
  if (states.empty()) throw DomainError("need at least one state to replay");
  const int k = features.k;
  if (static_cast<int>(w.size()) != k ||
      static_cast<int>(w_beta.size()) != k)
    throw DomainError("weight vectors must match the feature width");

  std::vector<double> e_w(k, 0.0), e_wb(k, 0.0);
  double v_beta = 0.0;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const int s = states[t];
    if (s < 0 || s >= features.n_states)
      throw DomainError("state index out of range");
    const double* phi = features.row(s);
    const double v_theta = dot(phi, w, k);
    if (t == 0) {
      v_beta = v_theta;
      for (int j = 0; j < k; ++j) e_w[j] = phi[j];
      continue;
    }
    const double logit = dot(phi, w_beta, k);
    const double b = fixed_beta ? *fixed_beta : sigmoid(logit);
    if (!(b >= 0.0 && b <= 1.0))
      throw DomainError("blend weight must lie in [0, 1]");
    const double carried = v_beta;
    const double keep = 1.0 - b;
    for (int j = 0; j < k; ++j) e_w[j] = b * phi[j] + keep * e_w[j];
    const double slope =
        fixed_beta ? 0.0 : sigmoid_grad(logit) * (v_theta - carried);
    for (int j = 0; j < k; ++j) e_wb[j] = slope * phi[j] + keep * e_wb[j];
    v_beta = b * v_theta + keep * carried;
  }
  if (grad_w) *grad_w = e_w;
  if (grad_w_beta) *grad_w_beta = e_wb;
  return v_beta;
}

LinearComparison run_linear_comparison(const MarkovRewardProcess& mrp,
                                       const FeatureMatrix& features,
                                       const LinearConfig& cfg,
                                       int n_replicates,
                                       std::uint64_t master_seed,
                                       int n_jobs) {
  cfg.validate();
  if (n_replicates < 1) throw ConfigError("need at least one replicate");
  const std::vector<double> oracle = exact_values(mrp);
  std::vector<int> eval_states(mrp.n_states);
  for (int s = 0; s < mrp.n_states; ++s) eval_states[s] = s;

  LinearComparison out;
  out.td0.resize(n_replicates);
  out.tdlambda.resize(n_replicates);
  out.rvf.resize(n_replicates);

  parallel_for(n_replicates, n_jobs, [&](int r) {
    const std::uint64_t seed = derive_seed(master_seed, r);
    // The same stream per method: the comparison is paired by construction.
    Rng rng_td(seed), rng_lam(seed), rng_rvf(seed);
    RmsveCurve td = run_linear_policy_eval(LinearMethod::TD0, mrp, features,
                                           cfg, eval_states, oracle, rng_td);
    RmsveCurve lam =
        run_linear_policy_eval(LinearMethod::TDLambda, mrp, features, cfg,
                               eval_states, oracle, rng_lam);
    RmsveCurve rv = run_linear_policy_eval(LinearMethod::RVF, mrp, features,
                                           cfg, eval_states, oracle, rng_rvf);
    out.td0[r] = std::move(td.rmsve);
    out.tdlambda[r] = std::move(lam.rmsve);
    out.rvf[r] = std::move(rv.rmsve);
    if (r == 0) out.transitions = std::move(td.transitions);
  });
  return out;
}

}  // namespace rvf
