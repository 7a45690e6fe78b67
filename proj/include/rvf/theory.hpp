#pragma once

// Contraction machinery for the smoothed-update operator: value bounds on
// the invariant set, the closed-form minimum gating threshold, the
// eligibility decomposition of a single update, and empirical certification
// that the operator contracts at the advertised modulus.

#include <vector>

#include "rvf/errors.hpp"
#include "rvf/mrp.hpp"
#include "rvf/random.hpp"

namespace rvf {

// The constants the contraction argument runs on. D is a floor on the
// emphasis (beta(s) >= D everywhere), C the gating threshold below which a
// state's update is skipped, and rewards must obey d * r_max_tilde <= r_min
// with everything positive (so value magnitudes stay ordered).
struct ContractionConfig {
  double gamma = 0.5;
  double d = 0.8;
  double c = 0.35;
  double r_min = 0.8;
  double r_max_tilde = 1.0;

  void validate() const;
};

struct ValueBounds {
  double v_min = 0.0;
  double v_max = 0.0;
};

// Extremes of the invariant set X = [V_min, V_max]:
//   V_max = r_max_tilde / (1 - (gamma + (1 - d)))
//   V_min = r_min      / (1 - (gamma - (1 - d)))
// Throws ConstraintError when a denominator is not positive (the
// assumptions exclude that).
ValueBounds value_bounds(const ContractionConfig& cfg);

// Margin of the self-mapping precondition
//   (1 - c) * (V_max - V_min) <= (1 - d) * V_min,
// returned as rhs - lhs (nonnegative means the operator maps X into X).
double self_mapping_margin(const ContractionConfig& cfg);

// Left side of the admissibility inequality for the gating threshold,
//   d (1-c) (1 - (gamma - (1-d)))
//   ------------------------------------------  <=  1 .
//   1 - (gamma + (1-d)) ((1-d) + (1-c))
// Throws ConstraintError when the denominator is not positive.
double gating_inequality_lhs(double gamma, double d, double c);

// Smallest c in [0, 1) satisfying the inequality above; the inequality is
// linear in (1 - c), so this is closed-form and exact. Any c' >= c also
// satisfies it. d = 1 gives 0 (no gating needed for plain TD).
double min_gating_threshold(double gamma, double d);

// One update seen through the eligibility lens: the smoothed estimate at
// step t splits into the share c_t of V(s_i) and a convex combination
// v_tilde of every other value on the trajectory, so that
//   v_beta = V(s_i) - delta,   delta = (1 - c_t) (V(s_i) - v_tilde).
struct DecompositionReport {
  double c_t = 0.0;
  double v_tilde = 0.0;
  double delta = 0.0;
  double v_beta = 0.0;
};

// betas/values run over trajectory positions 1..t (the first value enters
// through the initialization, so betas[0] never multiplies anything); i is
// the 1-based position being examined. The degenerate case c_t == 1 (all
// weight on V(s_i)) reports delta = 0 with v_tilde = v_beta.
DecompositionReport decompose_update(const std::vector<double>& betas,
                                     const std::vector<double>& values,
                                     int i);

// Monte-Carlo estimate of the smoothed-update operator applied to `values`:
// per start state, trajectory segments are rolled out and each step
// contributes r + gamma * V(next) + delta, weighted by the remaining
// eligibility of the start state; segments stop once that eligibility
// falls below max(cfg.c, 1e-4) or after 64 steps. `beta_assignment` is
// per state. Inputs outside [V_min, V_max] throw DomainError.
std::vector<double> apply_operator(const MarkovRewardProcess& mrp,
                                   const std::vector<double>& values,
                                   const std::vector<double>& beta_assignment,
                                   const ContractionConfig& cfg, Rng& rng,
                                   int n_samples);

// Same operator by exhaustive path enumeration (exact expectation); the
// oracle for the sampler. Cost grows with the branching factor, so it is
// limited to chains of at most 10 states.
std::vector<double> apply_operator_exact(
    const MarkovRewardProcess& mrp, const std::vector<double>& values,
    const std::vector<double>& beta_assignment, const ContractionConfig& cfg);

struct CertificationReport {
  double max_ratio = 0.0;   // worst observed |T V - T U|_inf / |V - U|_inf
  double bound = 0.0;       // gamma + (1 - d)
  double se_at_max = 0.0;   // standard error of the worst ratio
  int n_pairs = 0;
  bool pass = false;        // every pair within bound + 3 SE
};

// Draw n_pairs of value vectors inside X and per-state beta in [d, 1]
// (or `fixed_beta` for all pairs when given), evaluate both sides of each
// pair on common sampled paths, and compare the worst contraction ratio
// against gamma + (1 - d) plus three standard errors of the estimator.
CertificationReport certify_contraction(
    const MarkovRewardProcess& mrp, const ContractionConfig& cfg, int n_pairs,
    Rng& rng, int n_samples = 400,
    const std::vector<double>* fixed_beta = nullptr);

}  // namespace rvf
