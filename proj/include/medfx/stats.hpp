#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace medfx {

// Inverse standard normal CDF, Acklam's rational approximation refined with
// one Halley step; absolute error well below 1e-9 on (0, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0,1)");
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
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against erfc
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double mean(const Eigen::VectorXd& v) { return v.size() ? v.mean() : 0.0; }

// centered sum of squares / divisor
inline double variance(const Eigen::VectorXd& v, Eigen::Index divisor) {
  if (v.size() == 0 || divisor <= 0) return 0.0;
  double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(divisor);
}

inline double sample_variance(const Eigen::VectorXd& v) { return variance(v, v.size() - 1); }

// Order-statistic quantile: the ceil(q*B)-th smallest value (1-indexed),
// clamped to the sample. Endpoints of our bootstrap intervals are therefore
// always elements of the replicate vector.
inline double order_quantile(std::vector<double> x, double q) {
  if (x.empty()) throw std::invalid_argument("order_quantile: empty sample");
  std::sort(x.begin(), x.end());
  auto b = static_cast<std::ptrdiff_t>(x.size());
  auto k = static_cast<std::ptrdiff_t>(std::ceil(q * static_cast<double>(b)));
  k = std::max<std::ptrdiff_t>(1, std::min(b, k));
  return x[static_cast<size_t>(k - 1)];
}

// RMSE about a fixed reference, with compensated (Kahan) accumulation.
inline double rmse_about(const std::vector<double>& x, double ref) {
  double sum = 0.0, comp = 0.0;
  for (double xi : x) {
    double term = (xi - ref) * (xi - ref) - comp;
    double t = sum + term;
    comp = (t - sum) - term;
    sum = t;
  }
  return x.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(x.size()));
}

inline double sd_about_mean(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  double m = 0.0;
  for (double xi : x) m += xi;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double xi : x) s += (xi - m) * (xi - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

}  // namespace medfx
