#include "rvf/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

namespace rvf {

namespace {

// Below this eligibility a segment contributes nothing measurable; it also
// keeps ungated (c = 0) rollouts finite.
constexpr double kEligibilityFloor = 1e-4;
constexpr int kSegmentCap = 64;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void check_operator_inputs(const MarkovRewardProcess& mrp,
                           const std::vector<double>& values,
                           const std::vector<double>& beta_assignment,
                           const ContractionConfig& cfg) {
  cfg.validate();
  mrp.validate();
  if (std::fabs(mrp.gamma - cfg.gamma) > 1e-12)
    throw ConfigError("chain and contraction config disagree on gamma");
  if (static_cast<int>(values.size()) != mrp.n_states ||
      static_cast<int>(beta_assignment.size()) != mrp.n_states)
    throw ConfigError("value/beta vectors must have one entry per state");
  for (double b : beta_assignment)
    if (!(b >= 0.0 && b <= 1.0))
      throw DomainError("beta assignment entries must lie in [0, 1]");
  const ValueBounds x = value_bounds(cfg);
  for (double v : values)
    if (!(v >= x.v_min - 1e-9 && v <= x.v_max + 1e-9))
      throw DomainError("value vector leaves the invariant set [" +
                        fmt(x.v_min) + ", " + fmt(x.v_max) + "]");
}

}  // namespace

void ContractionConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw ConstraintError("gamma must lie in [0, 1)");
  if (!(d > 0.5 && d <= 1.0))
    throw ConstraintError("emphasis floor must satisfy 0.5 < D <= 1, got D = " +
                          fmt(d));
  if (!(d > gamma))
    throw ConstraintError("D > gamma violated: D = " + fmt(d) +
                          " <= gamma = " + fmt(gamma));
  if (!(c >= 0.0 && c < 1.0))
    throw ConstraintError("gating threshold must lie in [0, 1)");
  if (!(r_min > 0.0))
    throw ConstraintError("rewards must be positive: R_min = " + fmt(r_min));
  if (!(r_min <= r_max_tilde))
    throw ConstraintError("reward bounds out of order (R_min > R_max)");
  if (d * r_max_tilde > r_min + 1e-12)
    throw ConstraintError("D*R_max <= R_min violated: " + fmt(d) + "*" +
                          fmt(r_max_tilde) + " = " + fmt(d * r_max_tilde) +
                          " > " + fmt(r_min));
}

ValueBounds value_bounds(const ContractionConfig& cfg) {
  cfg.validate();
  const double denom_max = 1.0 - (cfg.gamma + (1.0 - cfg.d));
  const double denom_min = 1.0 - (cfg.gamma - (1.0 - cfg.d));
  if (!(denom_max > 0.0) || !(denom_min > 0.0))
    throw ConstraintError("value-bound denominator not positive; the "
                          "configuration violates D > gamma");
  return {cfg.r_min / denom_min, cfg.r_max_tilde / denom_max};
}

double self_mapping_margin(const ContractionConfig& cfg) {
  const ValueBounds x = value_bounds(cfg);
  return (1.0 - cfg.d) * x.v_min - (1.0 - cfg.c) * (x.v_max - x.v_min);
}

double gating_inequality_lhs(double gamma, double d, double c) {
  const double numer =
      d * (1.0 - c) * (1.0 - (gamma - (1.0 - d)));
  const double denom =
      1.0 - (gamma + (1.0 - d)) * ((1.0 - d) + (1.0 - c));
  if (!(denom > 0.0))
    throw ConstraintError("gating inequality denominator not positive at "
                          "c = " + fmt(c));
  return numer / denom;
}

double min_gating_threshold(double gamma, double d) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw ConstraintError("gamma must lie in [0, 1)");
  if (!(d > 0.5 && d <= 1.0))
    throw ConstraintError("emphasis floor must satisfy 0.5 < D <= 1");
  if (!(d > gamma))
    throw ConstraintError("D > gamma violated");

  // With u = 1 - c the inequality reads
  //   d * a * u <= 1 - delta * ((1 - d) + u),
  // a = 1 - (gamma - (1-d)), delta = gamma + (1-d); both sides linear in u.
  const double a = 1.0 - (gamma - (1.0 - d));
  const double delta = gamma + (1.0 - d);
  const double u = (1.0 - delta * (1.0 - d)) / (d * a + delta);
  if (!(u > 0.0))
    throw ConstraintError("no gating threshold in [0, 1) satisfies the "
                          "inequality for this configuration");
  return std::max(0.0, 1.0 - u);
}

DecompositionReport decompose_update(const std::vector<double>& betas,
                                     const std::vector<double>& values,
                                     int i) {
  const int t = static_cast<int>(betas.size());
  if (t < 1 || static_cast<int>(values.size()) != t)
    throw DomainError("need one beta and one value per trajectory position");
  if (i < 1 || i > t)
    throw DomainError("position i must lie in 1..t");
  for (double b : betas)
    if (!(b > 0.0 && b <= 1.0))
      throw DomainError("decomposition requires beta in (0, 1]");

  // Weight of each position's value inside the smoothed estimate. The
  // first position is the initialization, so it holds whatever the later
  // blends left over.
  std::vector<double> w(t, 0.0);
  double leftover = 1.0;
  for (int k = t; k >= 2; --k) {
    w[k - 1] = leftover * betas[k - 1];
    leftover *= 1.0 - betas[k - 1];
  }
  w[0] = leftover;

  double v_beta = values[0];
  for (int k = 2; k <= t; ++k)
    v_beta = betas[k - 1] * values[k - 1] + (1.0 - betas[k - 1]) * v_beta;

  DecompositionReport report;
  report.v_beta = v_beta;
  report.c_t = w[i - 1];
  if (report.c_t >= 1.0) {  // all weight on V(s_i): nothing left to compare
    report.c_t = 1.0;
    report.v_tilde = v_beta;
    report.delta = 0.0;
    return report;
  }
  report.v_tilde =
      (v_beta - report.c_t * values[i - 1]) / (1.0 - report.c_t);
  report.delta = (1.0 - report.c_t) * (values[i - 1] - report.v_tilde);
  return report;
}

std::vector<double> apply_operator(const MarkovRewardProcess& mrp,
                                   const std::vector<double>& values,
                                   const std::vector<double>& beta_assignment,
                                   const ContractionConfig& cfg, Rng& rng,
                                   int n_samples) {
  check_operator_inputs(mrp, values, beta_assignment, cfg);
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  const double threshold = std::max(cfg.c, kEligibilityFloor);
  const int n = mrp.n_states;

  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double num = 0.0, den = 0.0;
    for (int sample = 0; sample < n_samples; ++sample) {
      int s = i;
      double v_beta = values[i];  // segment-relative estimate, eligibility 1
      double c_rel = 1.0;
      for (int depth = 0; depth < kSegmentCap && c_rel >= threshold;
           ++depth) {
        const int next = sample_next_state(mrp, s, rng);
        // delta for the segment prefix; the identity collapses it to
        // V(s_i) - v_beta (0 on the first step).
        const double term = mrp.reward[next] + mrp.gamma * values[next] +
                            (values[i] - v_beta);
        num += c_rel * term;
        den += c_rel;
        if (mrp.is_terminal(next)) break;
        const double b = beta_assignment[next];
        v_beta = b * values[next] + (1.0 - b) * v_beta;
        c_rel *= 1.0 - b;
        s = next;
      }
    }
    out[i] = num / den;
  }
  return out;
}

std::vector<double> apply_operator_exact(
    const MarkovRewardProcess& mrp, const std::vector<double>& values,
    const std::vector<double>& beta_assignment,
    const ContractionConfig& cfg) {
  check_operator_inputs(mrp, values, beta_assignment, cfg);
  if (mrp.n_states > 10)
    throw ConfigError("exact enumeration is limited to 10 states");
  const double threshold = std::max(cfg.c, kEligibilityFloor);
  const int n = mrp.n_states;

  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double num = 0.0, den = 0.0;
    // Enumerate every prefix with eligibility still above the threshold.
    std::function<void(int, double, double, int, double)> walk =
        [&](int s, double v_beta, double c_rel, int depth, double prob) {
          if (c_rel < threshold || depth >= kSegmentCap) return;
          den += prob * c_rel;
          for (int next = 0; next < n; ++next) {
            const double p = mrp.transition[s][next];
            if (p <= 0.0) continue;
            const double term = mrp.reward[next] +
                                mrp.gamma * values[next] +
                                (values[i] - v_beta);
            num += prob * p * c_rel * term;
            if (mrp.is_terminal(next)) continue;
            const double b = beta_assignment[next];
            walk(next, b * values[next] + (1.0 - b) * v_beta,
                 c_rel * (1.0 - b), depth + 1, prob * p);
          }
        };
    walk(i, values[i], 1.0, 0, 1.0);
    out[i] = num / den;
  }
  return out;
}

CertificationReport certify_contraction(const MarkovRewardProcess& mrp,
                                        const ContractionConfig& cfg,
                                        int n_pairs, Rng& rng, int n_samples,
                                        const std::vector<double>* fixed_beta) {
  cfg.validate();
  mrp.validate();
  if (std::fabs(mrp.gamma - cfg.gamma) > 1e-12)
    throw ConfigError("chain and contraction config disagree on gamma");
  if (n_pairs < 1 || n_samples < 2)
    throw ConfigError("need n_pairs >= 1 and n_samples >= 2");
  for (double r : mrp.reward)
    if (r < cfg.r_min - 1e-12 || r > cfg.r_max_tilde + 1e-12)
      throw ConstraintError("chain rewards leave [R_min, R_max]");
  if (fixed_beta) {
    if (static_cast<int>(fixed_beta->size()) != mrp.n_states)
      throw ConfigError("fixed beta must have one entry per state");
    for (double b : *fixed_beta)
      if (!(b >= cfg.d && b <= 1.0))
        throw ConstraintError("fixed beta entries must lie in [D, 1]");
  }

  const ValueBounds x = value_bounds(cfg);
  const double threshold = std::max(cfg.c, kEligibilityFloor);
  const int n = mrp.n_states;

  CertificationReport report;
  report.bound = cfg.gamma + (1.0 - cfg.d);
  report.n_pairs = n_pairs;
  report.pass = true;

  std::vector<double> v(n), u(n), beta(n);
  for (int pair = 0; pair < n_pairs; ++pair) {
    for (int s = 0; s < n; ++s) {
      v[s] = rng.uniform(x.v_min, x.v_max);
      u[s] = rng.uniform(x.v_min, x.v_max);
      beta[s] = fixed_beta ? (*fixed_beta)[s] : rng.uniform(cfg.d, 1.0);
    }
    double infnorm = 0.0;
    for (int s = 0; s < n; ++s)
      infnorm = std::max(infnorm, std::fabs(v[s] - u[s]));
    if (infnorm < 1e-12) continue;  // identical draws carry no information

    double pair_ratio = 0.0, pair_se = 0.0;
    for (int i = 0; i < n; ++i) {
      // Both operator evaluations share each sampled path, so their
      // difference is estimated directly and the path noise cancels.
      double sum_a = 0.0, sum_w = 0.0, sum_aa = 0.0, sum_ww = 0.0,
             sum_aw = 0.0;
      for (int sample = 0; sample < n_samples; ++sample) {
        double a = 0.0, w = 0.0;
        int s = i;
        double vb_v = v[i], vb_u = u[i], c_rel = 1.0;
        for (int depth = 0; depth < kSegmentCap && c_rel >= threshold;
             ++depth) {
          const int next = sample_next_state(mrp, s, rng);
          const double term_diff = mrp.gamma * (v[next] - u[next]) +
                                   (v[i] - u[i]) - (vb_v - vb_u);
          a += c_rel * term_diff;
          w += c_rel;
          if (mrp.is_terminal(next)) break;
          const double b = beta[next];
          vb_v = b * v[next] + (1.0 - b) * vb_v;
          vb_u = b * u[next] + (1.0 - b) * vb_u;
          c_rel *= 1.0 - b;
          s = next;
        }
        sum_a += a;
        sum_w += w;
        sum_aa += a * a;
        sum_ww += w * w;
        sum_aw += a * w;
      }
      const double d_hat = sum_a / sum_w;
      const double mean_a = sum_a / n_samples;
      const double mean_w = sum_w / n_samples;
      const double var_a =
          (sum_aa - n_samples * mean_a * mean_a) / (n_samples - 1);
      const double var_w =
          (sum_ww - n_samples * mean_w * mean_w) / (n_samples - 1);
      const double cov_aw =
          (sum_aw - n_samples * mean_a * mean_w) / (n_samples - 1);
      // Delta-method variance of the ratio of means.
      const double var_ratio =
          (var_a - 2.0 * d_hat * cov_aw + d_hat * d_hat * var_w) /
          (n_samples * mean_w * mean_w);
      const double se = std::sqrt(std::max(var_ratio, 0.0));

      const double ratio = std::fabs(d_hat) / infnorm;
      if (ratio > pair_ratio) {
        pair_ratio = ratio;
        pair_se = se / infnorm;
      }
    }
    if (pair_ratio > report.max_ratio) {
      report.max_ratio = pair_ratio;
      report.se_at_max = pair_se;
    }
    if (pair_ratio > report.bound + 3.0 * pair_se) report.pass = false;
  }
  return report;
}

}  // namespace rvf
