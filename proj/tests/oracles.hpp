#pragma once

// Independent reference computations for the test suites. Nothing in here
// calls into the library's numeric paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace oracle {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Inverse normal CDF by bisection on the erfc-based CDF.
inline double bisect_inverse_normal(double p, double tol = 1e-13) {
  double lo = -40.0, hi = 40.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// O(K^2) midranks: rank = (#strictly smaller) + (#ties - 1) / 2.
inline std::vector<double> brute_midranks(std::span<const double> v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double x : v) {
      if (x < v[i]) less += 1;
      else if (x == v[i]) equal += 1;
    }
    r[i] = less + (equal - 1) / 2;
  }
  return r;
}

// SoftRank built from the brute-force pieces above.
inline std::vector<double> softrank(std::span<const double> v, double tau, double eps) {
  const auto r = brute_midranks(v);
  const double k = static_cast<double>(v.size());
  std::vector<double> a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    a[i] = bisect_inverse_normal(std::pow((r[i] + 0.5) / k, tau));
  double mean = 0;
  for (double x : a) mean += x;
  mean /= k;
  double var = 0;
  for (double x : a) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / k);
  for (double& x : a) x = (sd == 0) ? 0.0 : (x - mean) / (sd + eps);
  return a;
}

inline std::vector<double> log_softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0;
  for (double x : z) s += std::exp(x - m);
  const double lse = m + std::log(s);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

// Central finite differences of f at x with step h.
inline std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                              std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double fp = f(x);
    x[i] = saved - h;
    const double fm = f(x);
    x[i] = saved;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

// Entry-wise relative error with a denominator floor: entries whose
// magnitude is below the floor are compared on an absolute scale, since
// central differences at h = 1e-5 carry ~1e-11 round-off.
inline double max_relative_error(std::span<const double> a, std::span<const double> b,
                                 double floor = 1e-6) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace oracle
