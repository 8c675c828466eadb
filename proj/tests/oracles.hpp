#pragma once

// Independent reference implementations used by the tests. Written directly from the
// defining formulas, without sharing code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace oracle {

// Batch CUSUM: max(0, max_{1<=s<=k} sum_{i=s..k} xi_i) for every k.
inline std::vector<double> cusum_batch(const std::vector<double>& xi) {
  std::vector<double> out;
  for (std::size_t k = 0; k < xi.size(); ++k) {
    double best = 0.0;
    for (std::size_t s = 0; s <= k; ++s) {
      double sum = 0.0;
      for (std::size_t i = s; i <= k; ++i) sum += xi[i];
      best = std::max(best, sum);
    }
    out.push_back(best);
  }
  return out;
}

// First slot (1-based) where max over (m, s) of sum_{i=s..k} xi[i][m] exceeds gamma.
inline std::optional<std::size_t> bank_stop_brute(const std::vector<std::vector<double>>& xi,
                                                  double gamma) {
  for (std::size_t k = 0; k < xi.size(); ++k) {
    double best = 0.0;
    for (std::size_t m = 0; m < xi[k].size(); ++m) {
      for (std::size_t s = 0; s <= k; ++s) {
        double sum = 0.0;
        for (std::size_t i = s; i <= k; ++i) sum += xi[i][m];
        best = std::max(best, sum);
      }
    }
    if (best > gamma) return k + 1;
  }
  return std::nullopt;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Standard normal quantile by bisection on the CDF.
inline double normal_quantile(double p) {
  double lo = -40.0;
  double hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline double normal_pdf(double x, double mean, double var) {
  return std::exp(-(x - mean) * (x - mean) / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
}

// log f1(v) / f0(v) evaluated from the densities themselves.
inline double density_ratio_llr(double v, double mean0, double var0, double mean1, double var1) {
  return std::log(normal_pdf(v, mean1, var1) / normal_pdf(v, mean0, var0));
}

// Two-sample Kolmogorov-Smirnov p-value (asymptotic distribution with the usual
// small-sample correction).
inline double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Binomial 3-sigma band around p for n trials.
inline bool within_binomial_3sigma(double p_hat, double p, std::size_t n) {
  return std::abs(p_hat - p) <= 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace oracle
