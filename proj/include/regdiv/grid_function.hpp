#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <ostream>
#include <vector>

#include "regdiv/error.hpp"

namespace regdiv {

// Per-regime value function sampled on the uniform grid x_k = k h,
// k = 0..n. Above its barrier b_i a regime continues exactly as
// x - b_i + top_i; below it, values are linearly interpolated.
struct GridFunction {
  double h = 1e-3;
  std::size_t n = 0;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<double>> slopes;
  std::vector<double> barrier;
  std::vector<double> top;

  static GridFunction zeros(std::size_t regimes, double h, std::size_t n) {
    GridFunction f;
    f.h = h;
    f.n = n;
    f.values.assign(regimes, std::vector<double>(n + 1, 0.0));
    f.slopes.assign(regimes, std::vector<double>(n + 1, 0.0));
    f.barrier.assign(regimes, n * h);
    f.top.assign(regimes, 0.0);
    return f;
  }

  // Samples callables; every regime uses `b` as its linear-continuation level.
  template <class Value, class Slope>
  static GridFunction sample(std::size_t regimes, double h, std::size_t n, Value v, Slope d,
                             const std::vector<double>& b) {
    GridFunction f = zeros(regimes, h, n);
    for (std::size_t i = 0; i < regimes; ++i) {
      f.barrier[i] = std::min(b[i], f.x_cap());
      f.top[i] = v(i, f.barrier[i]);
      for (std::size_t k = 0; k <= n; ++k) {
        const double x = k * h;
        f.values[i][k] = x >= f.barrier[i] ? f.top[i] + x - f.barrier[i] : v(i, x);
        f.slopes[i][k] = x >= f.barrier[i] ? 1.0 : d(i, x);
      }
    }
    return f;
  }

  std::size_t regimes() const { return values.size(); }
  double x_cap() const { return n * h; }
  double x(std::size_t k) const { return k * h; }

  double operator()(std::size_t i, double x) const {
    if (x >= barrier[i]) return top[i] + (x - barrier[i]);
    if (x <= 0.0) return values[i][0];
    const std::size_t k = std::min(static_cast<std::size_t>(x / h), n - 1);
    const double x0 = k * h;
    double x1 = (k + 1) * h, v1 = values[i][k + 1];
    if (x1 > barrier[i]) {
      x1 = barrier[i];
      v1 = top[i];
    }
    if (x1 <= x0) return values[i][k];
    return values[i][k] + (v1 - values[i][k]) * (x - x0) / (x1 - x0);
  }

  double derivative(std::size_t i, double x) const {
    if (x >= barrier[i]) return 1.0;
    if (x <= 0.0) return slopes[i][0];
    const std::size_t k = std::min(static_cast<std::size_t>(x / h), n - 1);
    const double t = (x - k * h) / h;
    return slopes[i][k] + (slopes[i][k + 1] - slopes[i][k]) * t;
  }
};

// max_i sup_x |f_i(x) - g_i(x)| / (1 + x) over the grid nodes. Beyond the
// cap both functions have slope one, so the nodes carry the supremum.
inline double weighted_distance(const GridFunction& f, const GridFunction& g) {
  double d = 0.0;
  for (std::size_t i = 0; i < f.regimes(); ++i)
    for (std::size_t k = 0; k <= f.n; ++k)
      d = std::max(d, std::abs(f.values[i][k] - g.values[i][k]) / (1.0 + k * f.h));
  return d;
}

inline double sup_distance(const GridFunction& f, const GridFunction& g) {
  double d = 0.0;
  for (std::size_t i = 0; i < f.regimes(); ++i)
    for (std::size_t k = 0; k <= f.n; ++k) d = std::max(d, std::abs(f.values[i][k] - g.values[i][k]));
  return d;
}

// Largest second difference over all regimes (<= 0 for concave samples).
inline double max_second_difference(const GridFunction& f) {
  double m = -INFINITY;
  for (const auto& v : f.values)
    for (std::size_t k = 1; k + 1 < v.size(); ++k) m = std::max(m, v[k + 1] - 2.0 * v[k] + v[k - 1]);
  return m;
}

}  // namespace regdiv
