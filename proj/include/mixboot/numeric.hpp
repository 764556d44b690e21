#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace mixboot {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum(exp(x))). Returns -inf for an empty span or when every term is -inf.
inline double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return kNegInf;
  const double mx = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

// Normalizes log-weights in place into probabilities, returning the log
// normalizer. Terms at -inf map to exactly zero; a lone finite term maps to
// exactly one.
inline double normalize_log(std::span<double> logw) {
  const double lse = log_sum_exp(logw);
  for (double& v : logw) v = std::exp(v - lse);
  return lse;
}

// Responsibilities r_j = w_j k_j / sum_i w_i k_i from log w_j + log k_j.
// `log_terms` is overwritten with r. Returns log sum_i w_i k_i.
inline double responsibilities(std::span<double> log_terms) { return normalize_log(log_terms); }

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Population (1/n) variance.
inline double population_variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

// Sample (1/(n-1)) standard deviation; zero when n < 2.
inline double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

// Type-7 quantile of an ascending-sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace mixboot

namespace mixboot {

// w <- w + eta * (target - w). When both w and target lie on the simplex and
// eta is in [0, 1], so does the result (up to rounding). Every recursive update
// in the library goes through here.
inline void blend_toward(std::span<double> w, std::span<const double> target, double eta) {
  for (std::size_t j = 0; j < w.size(); ++j) w[j] += eta * (target[j] - w[j]);
}

}  // namespace mixboot
