#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rvf/errors.hpp"
#include "rvf/mrp.hpp"
#include "rvf/random.hpp"
#include "rvf/theory.hpp"

using namespace rvf;

namespace {

ContractionConfig standard_cfg() {
  ContractionConfig cfg;  // gamma 0.5, d 0.8, c 0.35, rewards [0.8, 1]
  return cfg;
}

}  // namespace

TEST_CASE("value bounds at the standard constants are exact fractions") {
  const ValueBounds vb = value_bounds(standard_cfg());
  // 1 / (1 - 0.7) and 0.8 / (1 - 0.3)
  CHECK(vb.v_max == doctest::Approx(10.0 / 3.0).epsilon(1e-14));
  CHECK(vb.v_min == doctest::Approx(8.0 / 7.0).epsilon(1e-14));
  CHECK(vb.v_min > 0.0);
  CHECK(vb.v_min < vb.v_max);
}

TEST_CASE("constraint violations are named individually") {
  ContractionConfig cfg = standard_cfg();
  cfg.d = 0.4;
  CHECK_THROWS_AS(cfg.validate(), ConstraintError);
  cfg = standard_cfg();
  cfg.gamma = 0.85;  // d no longer exceeds gamma
  CHECK_THROWS_AS(cfg.validate(), ConstraintError);
  cfg = standard_cfg();
  cfg.r_min = -0.2;
  CHECK_THROWS_AS(cfg.validate(), ConstraintError);
  cfg = standard_cfg();
  cfg.r_min = 0.5;  // now d * r_max > r_min
  CHECK_THROWS_WITH_AS(cfg.validate(),
                       doctest::Contains("D*R_max <= R_min violated"),
                       ConstraintError);
  cfg = standard_cfg();
  cfg.c = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConstraintError);
}

TEST_CASE("minimum gating threshold matches a grid scan of the inequality") {
  const std::vector<std::pair<double, double>> grid = {
      {0.5, 0.8}, {0.7, 0.9}, {0.3, 0.75}, {0.6, 0.95}, {0.2, 0.6}};
  for (const auto& [gamma, d] : grid) {
    const double closed = min_gating_threshold(gamma, d);
    // Independent scan: smallest c on a fine grid whose lhs is admissible.
    double scanned = 1.0;
    for (double c = 0.0; c < 1.0; c += 1e-5) {
      if (gating_inequality_lhs(gamma, d, c) <= 1.0 + 1e-12) {
        scanned = c;
        break;
      }
    }
    CHECK(std::abs(closed - scanned) < 2e-5);
  }
  // Frozen values for the two configurations used elsewhere.
  CHECK(min_gating_threshold(0.5, 0.8) ==
        doctest::Approx(20.0 / 63.0).epsilon(1e-13));
  CHECK(min_gating_threshold(0.7, 0.9) ==
        doctest::Approx(6.0 / 29.0).epsilon(1e-13));
  // No emphasis slack means plain TD and no gating requirement at all.
  CHECK(min_gating_threshold(0.4, 1.0) == 0.0);
}

TEST_CASE("the admissibility inequality is tight at the threshold") {
  for (const auto& [gamma, d] :
       std::vector<std::pair<double, double>>{{0.5, 0.8}, {0.7, 0.9}}) {
    const double c = min_gating_threshold(gamma, d);
    CHECK(gating_inequality_lhs(gamma, d, c) ==
          doctest::Approx(1.0).epsilon(1e-12));
    // Larger thresholds are strictly inside the admissible region.
    CHECK(gating_inequality_lhs(gamma, d, std::min(0.99, c + 0.05)) < 1.0);
    CHECK(gating_inequality_lhs(gamma, d, c - 0.05) > 1.0);
  }
}

TEST_CASE("self-mapping margin flips sign where it should") {
  ContractionConfig cfg = standard_cfg();
  cfg.c = 0.9;  // barely any update mass escapes: margin comfortably positive
  CHECK(self_mapping_margin(cfg) > 0.0);
  cfg.c = 0.35;
  CHECK(self_mapping_margin(cfg) < 0.0);
  // Crossover at c = 1 - (1-d) v_min / (v_max - v_min).
  const ValueBounds vb = value_bounds(cfg);
  const double c_star = 1.0 - (1.0 - cfg.d) * vb.v_min / (vb.v_max - vb.v_min);
  cfg.c = c_star;
  CHECK(self_mapping_margin(cfg) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("decomposition matches the worked three-step example") {
  // beta = (0.9, 0.1, 0.1), examined position 2: share 0.1 * 0.9 = 0.09,
  // and position 1 carries weight 0.81 / 0.91 of the complement.
  const std::vector<double> betas = {0.9, 0.1, 0.1};
  const std::vector<double> values = {0.0, 3.0, 1.0};
  const DecompositionReport rep = decompose_update(betas, values, 2);
  CHECK(rep.c_t == doctest::Approx(0.09).epsilon(1e-15));
  CHECK(rep.v_tilde ==
        doctest::Approx((0.81 * 0.0 + 0.1 * 1.0) / 0.91).epsilon(1e-14));
  CHECK(rep.v_beta == doctest::Approx(0.37).epsilon(1e-14));
  CHECK(rep.delta == doctest::Approx(values[1] - rep.v_beta).epsilon(1e-14));
}

TEST_CASE("decomposition identities hold for random draws") {
  Rng rng(2025);
  for (int rep = 0; rep < 500; ++rep) {
    const int t = 2 + static_cast<int>(rng.below(8));
    std::vector<double> betas(t), values(t);
    for (int j = 0; j < t; ++j) {
      betas[j] = 0.01 + 0.99 * rng.unit();
      values[j] = rng.uniform(-3, 3);
    }
    const int i = 1 + static_cast<int>(rng.below(t));
    const DecompositionReport d = decompose_update(betas, values, i);
    // v_beta = c_t V(s_i) + (1 - c_t) v_tilde and delta folds the rest.
    CHECK(d.v_beta == doctest::Approx(d.c_t * values[i - 1] +
                                      (1.0 - d.c_t) * d.v_tilde)
                          .epsilon(1e-11));
    CHECK(d.delta ==
          doctest::Approx((1.0 - d.c_t) * (values[i - 1] - d.v_tilde))
              .epsilon(1e-11));
    CHECK(values[i - 1] - d.delta == doctest::Approx(d.v_beta).epsilon(1e-11));
    CHECK(d.c_t >= 0.0);
    CHECK(d.c_t <= 1.0);
    // v_tilde is a convex combination of the other positions' values.
    double lo = 1e300, hi = -1e300;
    for (int j = 0; j < t; ++j) {
      if (j == i - 1) continue;
      lo = std::min(lo, values[j]);
      hi = std::max(hi, values[j]);
    }
    if (d.c_t < 1.0) {
      CHECK(d.v_tilde >= lo - 1e-9);
      CHECK(d.v_tilde <= hi + 1e-9);
    }
  }
}

TEST_CASE("decomposition edge and error cases") {
  // Examining the newest position: its share is just beta_t.
  const std::vector<double> betas = {0.5, 0.3};
  const std::vector<double> values = {1.0, 2.0};
  const DecompositionReport d = decompose_update(betas, values, 2);
  CHECK(d.c_t == doctest::Approx(0.3).epsilon(1e-15));
  // Full share: beta_i = 1 at the examined position wipes anything older.
  const DecompositionReport full =
      decompose_update({0.5, 1.0}, {1.0, 2.0}, 2);
  CHECK(full.c_t == 1.0);
  CHECK(full.delta == 0.0);
  CHECK(full.v_tilde == full.v_beta);

  CHECK_THROWS_AS(decompose_update({0.5, 0.0}, {1.0, 2.0}, 1), DomainError);
  CHECK_THROWS_AS(decompose_update({0.5}, {1.0, 2.0}, 1), DomainError);
  CHECK_THROWS_AS(decompose_update({0.5, 0.5}, {1.0, 2.0}, 3), DomainError);
  CHECK_THROWS_AS(decompose_update({0.5, 0.5}, {1.0, 2.0}, 0), DomainError);
}

TEST_CASE("sampled operator agrees with exhaustive enumeration") {
  ContractionConfig cfg = standard_cfg();
  for (std::uint64_t seed : {101ULL, 102ULL, 103ULL}) {
    const MarkovRewardProcess m =
        build_random_mrp(5, seed, cfg.r_min, cfg.r_max_tilde, cfg.gamma,
                         cfg.d);
    const ValueBounds vb = value_bounds(cfg);
    Rng rng(derive_seed(seed, 1));
    std::vector<double> values(m.n_states), beta(m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
      values[s] = rng.uniform(vb.v_min, vb.v_max);
      beta[s] = rng.uniform(cfg.d, 1.0);
    }
    const auto exact = apply_operator_exact(m, values, beta, cfg);
    Rng rng2(derive_seed(seed, 2));
    const auto sampled = apply_operator(m, values, beta, cfg, rng2, 60000);
    for (int s = 0; s < m.n_states; ++s) {
      CHECK(sampled[s] == doctest::Approx(exact[s]).epsilon(0.01));
      // The operator stays inside the invariant set, as the margin story
      // requires for admissible thresholds; here just sanity-bound it.
      CHECK(std::isfinite(exact[s]));
    }
  }
}

TEST_CASE("operator rejects inputs that leave the invariant set") {
  ContractionConfig cfg = standard_cfg();
  const MarkovRewardProcess m =
      build_random_mrp(5, 7, cfg.r_min, cfg.r_max_tilde, cfg.gamma, cfg.d);
  const ValueBounds vb = value_bounds(cfg);
  std::vector<double> values(5, 0.5 * (vb.v_min + vb.v_max));
  std::vector<double> beta(5, 0.9);
  Rng rng(1);
  CHECK_NOTHROW(apply_operator(m, values, beta, cfg, rng, 100));

  std::vector<double> outside = values;
  outside[2] = vb.v_max + 0.5;
  CHECK_THROWS_AS(apply_operator(m, outside, beta, cfg, rng, 100),
                  DomainError);
  std::vector<double> bad_beta = beta;
  bad_beta[0] = 1.2;
  CHECK_THROWS_AS(apply_operator(m, values, bad_beta, cfg, rng, 100),
                  DomainError);
  ContractionConfig mismatched = cfg;
  mismatched.gamma = 0.4;
  CHECK_THROWS_AS(apply_operator(m, values, beta, mismatched, rng, 100),
                  ConfigError);
  MarkovRewardProcess big = build_random_mrp(12, 8, cfg.r_min,
                                             cfg.r_max_tilde, cfg.gamma);
  std::vector<double> v12(12, 2.0), b12(12, 0.9);
  CHECK_THROWS_AS(apply_operator_exact(big, v12, b12, cfg), ConfigError);
}

TEST_CASE("certification passes on assumption-satisfying chains") {
  ContractionConfig cfg = standard_cfg();
  for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    const int n = 5 + static_cast<int>(seed % 4);
    const MarkovRewardProcess m = build_random_mrp(
        n, seed, cfg.r_min, cfg.r_max_tilde, cfg.gamma, cfg.d);
    Rng rng(derive_seed(seed, 9));
    const CertificationReport rep = certify_contraction(m, cfg, 8, rng, 400);
    CHECK(rep.pass);
    CHECK(rep.bound == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(rep.max_ratio < rep.bound + 3 * rep.se_at_max);
    CHECK(rep.max_ratio > 0.0);
    CHECK(rep.n_pairs == 8);
  }
}

TEST_CASE("certification rejects inconsistent setups") {
  ContractionConfig cfg = standard_cfg();
  const MarkovRewardProcess m =
      build_random_mrp(6, 5, cfg.r_min, cfg.r_max_tilde, cfg.gamma, cfg.d);
  Rng rng(3);
  // Rewards outside the certified range.
  MarkovRewardProcess hot = m;
  hot.reward[0] = 2.0;
  CHECK_THROWS_AS(certify_contraction(hot, cfg, 4, rng), ConstraintError);
  // A fixed emphasis below the floor would certify a different operator.
  const std::vector<double> low_beta(6, 0.5);
  CHECK_THROWS_AS(certify_contraction(m, cfg, 4, rng, 200, &low_beta),
                  ConstraintError);
  ContractionConfig wrong = cfg;
  wrong.gamma = 0.45;
  CHECK_THROWS_AS(certify_contraction(m, wrong, 4, rng), ConfigError);
}

TEST_CASE("certification with a pinned emphasis stays within the bound") {
  ContractionConfig cfg = standard_cfg();
  const MarkovRewardProcess m =
      build_random_mrp(6, 21, cfg.r_min, cfg.r_max_tilde, cfg.gamma, cfg.d);
  const std::vector<double> beta(6, cfg.d);  // worst admissible smoothing
  Rng rng(4);
  const CertificationReport rep =
      certify_contraction(m, cfg, 8, rng, 400, &beta);
  CHECK(rep.pass);
}
