#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <utility>

#include "regdiv/error.hpp"

namespace regdiv {

template <std::size_t N>
using Vec = std::array<double, N>;
template <std::size_t N>
using Mat = std::array<std::array<double, N>, N>;

struct SolveInfo {
  double min_pivot_ratio = 0.0;  // smallest |pivot| / max|a_ij|
};

// Gaussian elimination with partial pivoting. A pivot below 1e-13 * max|a_ij|
// is reported as singular.
template <std::size_t N>
Vec<N> solve_linear(Mat<N> a, Vec<N> b, SolveInfo* info = nullptr) {
  double scale = 0.0;
  for (const auto& row : a)
    for (double v : row) scale = std::max(scale, std::abs(v));
  if (!(scale > 0.0) || !std::isfinite(scale)) throw Error(ErrorCode::SingularLinearSystem, "matrix is zero or not finite");
  double min_ratio = INFINITY;
  for (std::size_t c = 0; c < N; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < N; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    if (std::abs(a[p][c]) < 1e-13 * scale) throw Error(ErrorCode::SingularLinearSystem, "pivot below threshold");
    min_ratio = std::min(min_ratio, std::abs(a[p][c]) / scale);
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (std::size_t r = c + 1; r < N; ++r) {
      const double f = a[r][c] / a[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < N; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  Vec<N> x{};
  for (std::size_t c = N; c-- > 0;) {
    double s = b[c];
    for (std::size_t k = c + 1; k < N; ++k) s -= a[c][k] * x[k];
    x[c] = s / a[c][c];
  }
  if (info) info->min_pivot_ratio = min_ratio;
  return x;
}

template <std::size_t N>
double norm_inf(const Vec<N>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::isfinite(x) ? std::abs(x) : INFINITY);
  return m;
}

template <std::size_t N>
double norm2(const Vec<N>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::isfinite(s) ? std::sqrt(s) : INFINITY;
}

}  // namespace regdiv
