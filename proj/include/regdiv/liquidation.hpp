#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "regdiv/band.hpp"
#include "regdiv/error.hpp"
#include "regdiv/fixedpoint.hpp"
#include "regdiv/grid_function.hpp"
#include "regdiv/model.hpp"

namespace regdiv {

// Operator for the liquidation-dividend strategy at levels (d, b): regime i
// pays everything below d_i, continues on (d_i, b_i) and pays the overflow
// at b_i. With u = x - d_i on the band,
//   w(u) = d_i Z(u) + alpha W(u) - int_0^u W(u - y) G(y) dy,
//   Z(u) = 1 + theta int_0^u W,  G(y) = sum_{j != i} q_ij f_j(y + d_i),
// and alpha is fixed by w'(b_i - d_i) = 1. For d = 0 this is T_b.
class LiquidationOperator {
 public:
  LiquidationOperator(const RegimeModel& m, double h, std::size_t n) : model_(m), h_(h), n_(n) {
    const auto th = effective_rates(m);
    for (std::size_t i = 0; i < m.size(); ++i) kernels_.emplace_back(m.states[i].mu, m.states[i].sigma, th[i], h);
  }

  double x_cap() const { return n_ * h_; }
  double h() const { return h_; }
  std::size_t n() const { return n_; }

  GridFunction apply(const GridFunction& f, const BarrierPolicy& p) const {
    GridFunction out = GridFunction::zeros(model_.size(), h_, n_);
    std::vector<double> u, g, K, grid_g, kap;
    std::vector<std::size_t> node;  // grid index of each interior band node
    for (std::size_t i = 0; i < model_.size(); ++i) {
      const double d = p.d(i), b = std::min(p.barriers[i], x_cap());
      if (!(d >= 0.0) || !(b > d)) throw Error(ErrorCode::InvalidBand, "need 0 <= d_i < b_i");
      const double tiny = 1e-12 * h_;
      // Band nodes: u = 0, every grid node strictly inside (d, b), then b - d.
      u.assign(1, 0.0);
      node.assign(1, 0);
      for (std::size_t k = 0; k <= n_; ++k) {
        const double x = k * h_;
        if (x > d + tiny && x < b - tiny) {
          u.push_back(x - d);
          node.push_back(k);
        }
      }
      u.push_back(b - d);
      // G and the cell curvatures come from the grid nodes; the off-grid ends
      // d and b take the quadratic model of the grid cell they fall in.
      mix(i, f, grid_g);
      cell_curvatures(h_, grid_g, kap);
      auto cell_of = [&](double x) { return std::min(static_cast<std::size_t>(x / h_ + 1e-9), n_ - 1); };
      g.resize(u.size());
      K.resize(u.size() - 1);
      for (std::size_t j = 0; j < u.size(); ++j) {
        const double x = u[j] + d;
        const std::size_t c = cell_of(x);
        g[j] = (j > 0 && j + 1 < u.size()) ? grid_g[node[j]] : cell_value(h_, grid_g, kap, c, x - c * h_);
        if (j + 1 < u.size()) K[j] = kap.empty() ? 0.0 : kap[c];
      }
      const auto s = solve_band(kernels_[i], d, u, g, K);
      const double top = s.value.back();
      for (std::size_t k = 0; k <= n_; ++k) {
        const double x = k * h_;
        out.values[i][k] = x <= d + tiny ? x : top + x - b;
        out.slopes[i][k] = 1.0;
      }
      for (std::size_t j = 1; j + 1 < u.size(); ++j) {
        out.values[i][node[j]] = s.value[j];
        out.slopes[i][node[j]] = s.slope[j];
      }
      out.barrier[i] = b;
      out.top[i] = top;
    }
    return out;
  }

 private:
  // sum_{j != i} q_ij f_j at every grid node.
  void mix(std::size_t i, const GridFunction& f, std::vector<double>& g) const {
    g.assign(n_ + 1, 0.0);
    for (std::size_t j = 0; j < model_.size(); ++j)
      if (j != i && model_.generator[i][j] != 0.0)
        for (std::size_t k = 0; k <= n_; ++k) g[k] += model_.generator[i][j] * f.values[j][k];
  }

  RegimeModel model_;
  double h_;
  std::size_t n_;
  std::vector<BandKernel> kernels_;
};

// Value of the liquidation-dividend strategy at (d, b) as the fixed point of
// the operator above.
inline BarrierValueResult liquidation_strategy_value(const RegimeModel& m, const BarrierPolicy& p, double tol = 1e-10,
                                                     double h = 1e-3, double x_cap = 0.0) {
  const double top = *std::max_element(p.barriers.begin(), p.barriers.end());
  if (x_cap < top) x_cap = 1.5 * top + h;
  const LiquidationOperator op(m, h, grid_intervals(x_cap, h));
  BarrierValueResult r;
  GridFunction f = GridFunction::zeros(m.size(), h, op.n());
  GridFunction next = op.apply(f, p);
  double gap = weighted_distance(next, f);
  const double c = contraction_constant(m);
  std::size_t limit = 100;
  if (c > 0.0 && gap > tol) limit += static_cast<std::size_t>(std::ceil(std::log(tol / gap) / std::log(c)));
  r.gaps.push_back(gap);
  while (gap > tol) {
    if (++r.iterations > limit) throw Error(ErrorCode::NoConvergence, "liquidation value iteration exceeded its budget");
    f = std::move(next);
    next = op.apply(f, p);
    gap = weighted_distance(next, f);
    r.gaps.push_back(gap);
  }
  r.value = std::move(next);
  return r;
}

}  // namespace regdiv
