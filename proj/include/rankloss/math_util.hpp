#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace rankloss {

// log(1 + exp(x)) without overflow for large |x|.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log sum_i exp(x_i), max-subtracted. Returns -inf for an empty span.
inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) {
    return -std::numeric_limits<double>::infinity();
  }
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) {
    return m;
  }
  double acc = 0.0;
  for (double x : xs) {
    acc += std::exp(x - m);
  }
  return m + std::log(acc);
}

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

}  // namespace rankloss
