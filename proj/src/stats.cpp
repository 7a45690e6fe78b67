#include "rvf/stats.hpp"

#include <cmath>

#include "rvf/errors.hpp"

namespace rvf {

double RunningStat::stddev() const { return std::sqrt(variance()); }

double RunningStat::se() const {
  return n > 0 ? stddev() / std::sqrt(static_cast<double>(n)) : 0.0;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw DomainError("normal quantile needs p strictly inside (0, 1)");

  // Acklam's coefficients (central region plus two tails).
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
          a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double student_t_quantile(double p, int df) {
  if (df < 1) throw DomainError("degrees of freedom must be >= 1");
  const double z = normal_quantile(p);
  const double v = df;
  const double z3 = z * z * z;
  const double z5 = z3 * z * z;
  const double z7 = z5 * z * z;
  return z + (z3 + z) / (4.0 * v) +
         (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * v * v) +
         (3.0 * z7 + 19.0 * z5 + 17.0 * z3 - 15.0 * z) /
             (384.0 * v * v * v);
}

PairedTestResult paired_one_sided_less(const std::vector<double>& a,
                                       const std::vector<double>& b,
                                       double alpha) {
  if (a.size() != b.size() || a.size() < 2)
    throw DomainError("paired test needs two matched samples of size >= 2");
  if (!(alpha > 0.0 && alpha < 0.5))
    throw DomainError("alpha must lie in (0, 0.5)");

  RunningStat diff;
  for (std::size_t i = 0; i < a.size(); ++i) diff.push(a[i] - b[i]);

  PairedTestResult result;
  result.mean_diff = diff.mean;
  result.se = diff.se();
  result.threshold =
      -student_t_quantile(1.0 - alpha, static_cast<int>(a.size()) - 1);
  if (result.se == 0.0) {
    // All differences identical: significance collapses to the sign.
    result.t_stat = 0.0;
    result.significant = result.mean_diff < 0.0;
    return result;
  }
  result.t_stat = result.mean_diff / result.se;
  result.significant = result.t_stat <= result.threshold;
  return result;
}

}  // namespace rvf
