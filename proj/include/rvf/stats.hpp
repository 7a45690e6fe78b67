#pragma once

// Small statistics kit: running moments, normal and Student-t quantiles,
// and the paired one-sided comparison the evaluation suite reports.

#include <vector>

namespace rvf {

// Welford accumulator.
struct RunningStat {
  long long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    n += 1;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }
  double stddev() const;
  double se() const;  // stddev / sqrt(n)
};

// Inverse standard-normal CDF (Acklam's rational approximation, relative
// error below 1.2e-9 over (0, 1)). p must lie strictly inside (0, 1).
double normal_quantile(double p);

// Student-t quantile via the Cornish-Fisher expansion around the normal
// quantile; good to ~1e-4 for the df >= 10 used here.
double student_t_quantile(double p, int df);

struct PairedTestResult {
  double mean_diff = 0.0;  // mean(a - b)
  double se = 0.0;
  double t_stat = 0.0;     // mean_diff / se
  double threshold = 0.0;  // -t_{1-alpha, n-1}
  bool significant = false;  // evidence that mean(a - b) < 0
};

// One-sided paired comparison of matched samples: rejects "a is no better
// than b" when the mean difference is significantly below zero.
PairedTestResult paired_one_sided_less(const std::vector<double>& a,
                                       const std::vector<double>& b,
                                       double alpha = 0.05);

}  // namespace rvf
