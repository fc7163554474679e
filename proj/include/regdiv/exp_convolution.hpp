#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace regdiv {

// Running integrals J(x) = int_0^x e^{lambda (x - u)} g(u) du for g
// quadratic on each cell: the chord through the end values plus a bump
// kappa s (s - t) / 2 carrying the cell curvature kappa. The update over one
// cell is exact for such g, so the whole pass costs O(n) instead of O(n^2)
// quadrature. kappa = 0 gives the piecewise-linear rule.

namespace detail {

// phi1(z) = (e^z - 1)/z, phi2(z) = (e^z - 1 - z)/z^2
inline void exp_phi(double z, double& phi1, double& phi2) {
  if (std::abs(z) < 1e-2) {
    phi1 = 1.0 + z * (1.0 / 2 + z * (1.0 / 6 + z * (1.0 / 24 + z * (1.0 / 120 + z / 720))));
    phi2 = 1.0 / 2 + z * (1.0 / 6 + z * (1.0 / 24 + z * (1.0 / 120 + z * (1.0 / 720 + z / 5040))));
    return;
  }
  const double em1 = std::expm1(z);
  phi1 = em1 / z;
  phi2 = (em1 - z) / (z * z);
}

// phi3(z) = int_0^1 e^{z v} v (1 - v) dv = (e^z (z - 2) + z + 2) / z^3
inline double exp_phi3(double z) {
  if (std::abs(z) < 1.0) {
    double term = 1.0, sum = 0.0;  // term = z^k / k!
    for (int k = 0; k < 20; ++k) {
      sum += term / ((k + 2.0) * (k + 3.0));
      term *= z / (k + 1.0);
    }
    return sum;
  }
  return (std::exp(z) * (z - 2.0) + z + 2.0) / (z * z * z);
}

}  // namespace detail

struct ExpCellWeights {
  double decay = 1.0;  // e^{lambda t}
  double w_left = 0.0;
  double w_right = 0.0;
  double w_curv = 0.0;  // weight of the cell curvature
};

// Weights advancing J across a sub-interval of length t.
inline ExpCellWeights exp_cell_weights(double lambda, double t) {
  double p1, p2;
  detail::exp_phi(lambda * t, p1, p2);
  return {std::exp(lambda * t), t * (p1 - p2), t * p2, -0.5 * t * t * t * detail::exp_phi3(lambda * t)};
}

// The bump s (s - t) is symmetric in the cell, so the same curvature weight
// serves integrals taken from either end.
inline double exp_advance(const ExpCellWeights& w, double j_left, double g_left, double g_right, double kappa = 0.0) {
  return w.decay * j_left + w.w_left * g_left + w.w_right * g_right + w.w_curv * kappa;
}

// Curvature of each cell [k h, (k+1) h] from node values g_0..g_N: the mean
// of the second differences at its two ends, extrapolated linearly at the
// ends of the grid. This is the second derivative at the cell midpoint of
// the cubic through the four surrounding nodes.
inline void cell_curvatures(double h, const std::vector<double>& g, std::vector<double>& kappa) {
  const std::size_t n = g.empty() ? 0 : g.size() - 1;
  kappa.assign(n, 0.0);
  if (n < 3) return;
  std::vector<double> d2(n + 1);
  for (std::size_t k = 1; k < n; ++k) d2[k] = (g[k - 1] - 2.0 * g[k] + g[k + 1]) / (h * h);
  d2[0] = 2.0 * d2[1] - d2[2];
  d2[n] = 2.0 * d2[n - 1] - d2[n - 2];
  for (std::size_t k = 0; k < n; ++k) kappa[k] = 0.5 * (d2[k] + d2[k + 1]);
}

// Quadratic model of g inside cell k at offset t from its left node.
inline double cell_value(double h, const std::vector<double>& g, const std::vector<double>& kappa, std::size_t k,
                         double t) {
  const double c = k < kappa.size() ? kappa[k] : 0.0;
  const double right = k + 1 < g.size() ? g[k + 1] : g[k];
  return g[k] + (right - g[k]) * (t / h) + 0.5 * c * t * (t - h);
}

// J at nodes 0..g.size()-1 of a grid with step h.
inline void exp_running_integral(double lambda, double h, const std::vector<double>& g,
                                 std::vector<double>& out, std::size_t count = static_cast<std::size_t>(-1)) {
  if (count > g.size()) count = g.size();
  out.assign(count, 0.0);
  if (count == 0) return;
  const auto w = exp_cell_weights(lambda, h);
  std::vector<double> kappa;
  cell_curvatures(h, g, kappa);
  for (std::size_t k = 1; k < count; ++k) out[k] = exp_advance(w, out[k - 1], g[k - 1], g[k], kappa[k - 1]);
}

}  // namespace regdiv
