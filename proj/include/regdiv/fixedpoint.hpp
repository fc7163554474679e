#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <ostream>
#include <utility>
#include <vector>

#include "regdiv/analytics.hpp"
#include "regdiv/band.hpp"
#include "regdiv/error.hpp"
#include "regdiv/exp_convolution.hpp"
#include "regdiv/grid_function.hpp"
#include "regdiv/model.hpp"

namespace regdiv {

struct BarrierPolicy {
  std::vector<double> barriers;
  std::vector<double> liquidation;  // empty means d_i = 0

  double d(std::size_t i) const { return i < liquidation.size() ? liquidation[i] : 0.0; }
};

struct BarrierChoice {
  std::vector<double> barriers;
  std::vector<double> smooth_fit;  // second derivative of T_b(v) at b_i
};

struct IterationReport {
  std::size_t outer_iterations = 0;
  double gap = INFINITY;
  double contraction = 0.0;
  double x_cap = 0.0;
  double h = 0.0;
  std::vector<std::vector<double>> lower_barriers;
  std::vector<std::vector<double>> upper_barriers;
  std::vector<double> gaps;
};

// Quantities of T_b(f)(., i) at a point b, from the running integrals.
struct PointEval {
  double A = 0.0;       // A_i^f(b)
  double value = 0.0;   // T(b)
  double second = 0.0;  // T''(b)
};

// The operator T_b and the barrier rule b^v on a fixed uniform grid, built on
// the band form of solve_band with d = 0. Node exponentials and cell weights
// are cached, so one application costs O(n) per regime.
class TbOperator {
 public:
  TbOperator(const RegimeModel& m, double h, std::size_t n) : model_(m), h_(h), n_(n) {
    const auto th = effective_rates(m);
    kernels_.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      auto& k = kernels_[i];
      k.band = BandKernel(m.states[i].mu, m.states[i].sigma, th[i], h);
      k.em.resize(n + 1);
      k.epn.resize(n + 1);
      for (std::size_t j = 0; j <= n; ++j) {
        k.em[j] = std::exp(k.band.w.lm * (j * h));
        k.epn[j] = std::exp(-k.band.w.lp * (j * h));
      }
    }
  }

  double h() const { return h_; }
  std::size_t n() const { return n_; }
  double x_cap() const { return n_ * h_; }
  const RegimeModel& model() const { return model_; }

  GridFunction apply(const GridFunction& f, const std::vector<double>& b) const {
    check_grid(f);
    if (b.size() != model_.size()) throw Error(ErrorCode::DimensionMismatch, "one barrier per regime");
    GridFunction out = GridFunction::zeros(model_.size(), h_, n_);
    std::vector<double> g, kap, u;
    for (std::size_t i = 0; i < model_.size(); ++i) {
      if (!(b[i] > 0.0) || b[i] > x_cap() * (1 + 1e-12))
        throw Error(ErrorCode::BarrierOutOfRange, "barrier " + std::to_string(b[i]) + " outside (0, x_cap]");
      const double bi = std::min(b[i], x_cap());
      // Grid nodes strictly below b, then b itself.
      std::size_t kb = std::min(static_cast<std::size_t>(bi / h_), n_);
      if (kb * h_ >= bi - 1e-12 * h_) kb = kb == 0 ? 0 : kb - 1;
      mix(i, f, g, n_ + 1);
      cell_curvatures(h_, g, kap);
      const double gb = cell_value(h_, g, kap, kb, bi - kb * h_);
      g.resize(kb + 1);
      g.push_back(gb);
      kap.resize(kb + 1);
      u.resize(kb + 2);
      for (std::size_t j = 0; j <= kb; ++j) u[j] = j * h_;
      u[kb + 1] = bi;
      const auto s = solve_band(kernels_[i].band, 0.0, u, g, kap);
      const double top = s.value[kb + 1];
      for (std::size_t j = 0; j <= n_; ++j) {
        if (j <= kb) {
          out.values[i][j] = s.value[j];
          out.slopes[i][j] = s.slope[j];
        } else {
          out.values[i][j] = top + j * h_ - bi;
          out.slopes[i][j] = 1.0;
        }
      }
      out.values[i][0] = 0.0;
      out.barrier[i] = bi;
      out.top[i] = top;
    }
    return out;
  }

  BarrierChoice best_barrier(const GridFunction& v) const {
    check_grid(v);
    if (max_second_difference(v) > 1e-8) throw Error(ErrorCode::NotConcavePayoff, "payoff fails the concavity test");
    BarrierChoice out;
    std::vector<double> g, kap, M, P;
    for (std::size_t i = 0; i < model_.size(); ++i) {
      const auto& k = kernels_[i];
      const double c = k.band.w.k, lp = k.band.w.lp, lm = k.band.w.lm;
      mix(i, v, g, n_ + 1);
      cell_curvatures(h_, g, kap);
      running(k, g, kap, M, P, n_ + 1);
      std::size_t best = 1;
      double best_a = -INFINITY;
      for (std::size_t j = 1; j <= n_; ++j) {
        const double E = (1.0 - c * lm * M[j] + c * lm * k.em[j] * P[j]) / (c * (lp - lm * k.em[j] * k.epn[j]));
        const double a = E * k.epn[j] + P[j];
        if (a > best_a) {
          best_a = a;
          best = j;
        }
      }
      if (best == n_)
        throw Error(ErrorCode::MaximumAtCap, "A_" + std::to_string(i) + " peaks at the grid cap");
      // A carries a factor e^{-l+ b} and can be flat to rounding near its
      // maximum, so the grid argmax only seeds the search. The maximizer is
      // where T''(b) (same sign as -A'(b)) turns from negative to positive:
      // walk to that sign change, then bisect on it.
      auto second = [&](double b) { return at_point(i, g, kap, M, P, std::max(b, 1e-300)).second; };
      std::size_t j = best;
      if (second(j * h_) > 0.0) {
        while (j > 0 && second(j * h_) > 0.0) --j;
      } else {
        while (j < n_ && second(j * h_) <= 0.0) ++j;
        if (j == n_)
          throw Error(ErrorCode::MaximumAtCap, "A_" + std::to_string(i) + " peaks at the grid cap");
        --j;
      }
      double lo = j * h_, hi = (j + 1) * h_;
      while (hi - lo > h_ * 1e-9) {
        const double mid = 0.5 * (lo + hi);
        (second(mid) > 0.0 ? hi : lo) = mid;
      }
      const double b = 0.5 * (lo + hi);
      out.barriers.push_back(b);
      out.smooth_fit.push_back(at_point(i, g, kap, M, P, b).second);
    }
    return out;
  }

  // Off-grid A_i^f(b), T(b) and T''(b), for diagnostics and tests.
  PointEval point(std::size_t i, const GridFunction& f, double b) const {
    std::vector<double> g, kap, M, P;
    const std::size_t kb = std::min(static_cast<std::size_t>(b / h_), n_ - 1);
    mix(i, f, g, std::min({kb + 4, n_ + 1, f.n + 1}));
    cell_curvatures(h_, g, kap);
    running(kernels_[i], g, kap, M, P, kb + 1);
    return at_point(i, g, kap, M, P, b);
  }

  double A(std::size_t i, const GridFunction& f, double b) const { return point(i, f, b).A; }

 private:
  struct Kernel {
    BandKernel band;
    std::vector<double> em, epn;  // e^{l- x_j}, e^{-l+ x_j}
  };

  void check_grid(const GridFunction& f) const {
    if (f.regimes() != model_.size() || f.n != n_ || std::abs(f.h - h_) > 1e-15 * h_)
      throw Error(ErrorCode::DimensionMismatch, "grid function does not match the operator grid");
  }

  // g(x) = sum_{j != i} q_ij f_j(x) at the first `count` nodes.
  void mix(std::size_t i, const GridFunction& f, std::vector<double>& g, std::size_t count) const {
    g.assign(count, 0.0);
    for (std::size_t j = 0; j < model_.size(); ++j) {
      if (j == i) continue;
      const double q = model_.generator[i][j];
      if (q == 0.0) continue;
      for (std::size_t k = 0; k < count; ++k) g[k] += q * f.values[j][k];
    }
  }

  // M(x_j) = int_0^x e^{l-(x-y)} g and Ph(x_j) = int_0^x e^{-l+ y} g.
  static void running(const Kernel& k, const std::vector<double>& g, const std::vector<double>& kap,
                      std::vector<double>& M, std::vector<double>& P, std::size_t count) {
    M.assign(count, 0.0);
    P.assign(count, 0.0);
    for (std::size_t j = 1; j < count; ++j) {
      M[j] = exp_advance(k.band.m_h, M[j - 1], g[j - 1], g[j], kap[j - 1]);
      P[j] = P[j - 1] + k.epn[j - 1] * exp_advance(k.band.pn_h, 0.0, g[j], g[j - 1], kap[j - 1]);
    }
  }

  PointEval at_point(std::size_t i, const std::vector<double>& g, const std::vector<double>& kap,
                     const std::vector<double>& M, const std::vector<double>& P, double b) const {
    const auto& k = kernels_[i];
    const std::size_t kb = std::min(static_cast<std::size_t>(b / h_), std::min(n_ - 1, M.size() - 1));
    const double t = b - kb * h_;
    const double gb = cell_value(h_, g, kap, kb, t);
    const double Mb = exp_advance(exp_cell_weights(k.band.w.lm, t), M[kb], g[kb], gb, kap[kb]);
    const double Pb = P[kb] + k.epn[kb] * exp_advance(exp_cell_weights(-k.band.w.lp, t), 0.0, gb, g[kb], kap[kb]);
    const auto e = k.band.ends(0.0, b, Mb, Pb);
    const double c = k.band.w.k, lp = k.band.w.lp, lm = k.band.w.lm, em = std::exp(lm * b);
    PointEval r;
    r.A = e.alpha;
    r.value = c * (e.E - e.alpha * em + Mb);
    r.second = c * (lp * lp * e.E - e.alpha * lm * lm * em + lm * lm * Mb) + c * gb * (lm - lp);
    return r;
  }

  RegimeModel model_;
  double h_;
  std::size_t n_;
  std::vector<Kernel> kernels_;
};

inline std::size_t grid_intervals(double x_cap, double h) {
  return static_cast<std::size_t>(std::ceil(x_cap / h - 1e-9));
}

inline GridFunction apply_Tb(const GridFunction& f, const BarrierPolicy& b, const RegimeModel& m) {
  return TbOperator(m, f.h, f.n).apply(f, b.barriers);
}

inline BarrierChoice best_barrier_for_payoff(const GridFunction& v, const RegimeModel& m) {
  return TbOperator(m, v.h, v.n).best_barrier(v);
}

struct BarrierValueResult {
  GridFunction value;
  std::size_t iterations = 0;
  std::vector<double> gaps;
};

// Fixed point of f -> T_b f by Picard iteration from `start`.
inline BarrierValueResult barrier_value(const TbOperator& op, const std::vector<double>& b, double tol,
                                        const GridFunction& start) {
  BarrierValueResult r;
  GridFunction f = start;
  GridFunction next = op.apply(f, b);
  double gap = weighted_distance(next, f);
  const double c = contraction_constant(op.model());
  const std::size_t margin = 100;
  std::size_t limit = margin;
  if (c > 0.0 && gap > tol) limit += static_cast<std::size_t>(std::ceil(std::log(tol / gap) / std::log(c)));
  r.gaps.push_back(gap);
  while (gap > tol) {
    if (++r.iterations > limit) throw Error(ErrorCode::NoConvergence, "barrier value iteration exceeded its budget");
    f = std::move(next);
    next = op.apply(f, b);
    gap = weighted_distance(next, f);
    r.gaps.push_back(gap);
  }
  r.value = std::move(next);
  return r;
}

inline BarrierValueResult barrier_value(const BarrierPolicy& b, const RegimeModel& m, double tol, double h = 1e-3,
                                        double x_cap = 0.0) {
  double top = *std::max_element(b.barriers.begin(), b.barriers.end());
  if (x_cap < top) x_cap = 1.5 * top + h;
  const TbOperator op(m, h, grid_intervals(x_cap, h));
  return barrier_value(op, b.barriers, tol, GridFunction::zeros(m.size(), h, op.n()));
}

struct SolveOptions {
  double h = 1e-3;
  double tol = 1e-7;
  std::size_t max_outer = 200000;
  int max_cap_doublings = 3;
  // Called after every outer step with the lower and upper iterates.
  std::function<void(std::size_t, const GridFunction&, const GridFunction&)> observer;
};

struct SolveResult {
  GridFunction value;
  std::vector<double> barriers;
  std::vector<double> smooth_fit;
  IterationReport report;
};

namespace detail {

inline GridFunction sample_bound(const SingleRegimeSolution& s, std::size_t regimes, double h, std::size_t n) {
  return GridFunction::sample(
      regimes, h, n, [&](std::size_t, double x) { return s.value(x); },
      [&](std::size_t, double x) { return s.derivative(x); }, std::vector<double>(regimes, s.barrier));
}

// Re-tags a sampled function as plain samples with slope one past the cap.
inline GridFunction as_samples(GridFunction f) {
  for (std::size_t i = 0; i < f.regimes(); ++i) {
    f.barrier[i] = f.x_cap();
    f.top[i] = f.values[i][f.n];
  }
  return f;
}

}  // namespace detail

// Two-sided iteration v <- T_{b^v}(v) from the a priori bounds. Both
// sequences are monotone and squeeze the value function; the midpoint is
// returned once they are within tol of each other.
inline SolveResult solve(const RegimeModel& m, const SolveOptions& opt = {}) {
  if (drift_sign_case(m) != DriftCase::AllPositive)
    throw Error(ErrorCode::DriftHypothesisViolated, "fixed-point solver needs every mu_i > 0");
  const auto bounds = apriori_bounds(m);
  const auto th = effective_rates(m);
  double cap = 1.5 * std::max(bounds.upper.barrier, bounds.lower.barrier);
  for (std::size_t i = 0; i < m.size(); ++i)
    cap = std::max(cap, 2.0 * single_regime_barrier(m.states[i].mu, m.states[i].sigma, th[i]));

  for (int attempt = 0;; ++attempt) {
    try {
      const TbOperator op(m, opt.h, grid_intervals(cap, opt.h));
      SolveResult res;
      auto& rep = res.report;
      rep.contraction = contraction_constant(m);
      rep.x_cap = op.x_cap();
      rep.h = opt.h;
      GridFunction lo = detail::sample_bound(bounds.lower, m.size(), opt.h, op.n());
      GridFunction hi = detail::sample_bound(bounds.upper, m.size(), opt.h, op.n());
      double gap = sup_distance(hi, lo);
      while (gap > opt.tol) {
        if (rep.outer_iterations >= opt.max_outer)
          throw Error(ErrorCode::NoConvergence, "two-sided iteration did not close the gap");
        const auto blo = op.best_barrier(lo);
        const auto bhi = op.best_barrier(hi);
        lo = op.apply(lo, blo.barriers);
        hi = op.apply(hi, bhi.barriers);
        gap = sup_distance(hi, lo);
        ++rep.outer_iterations;
        rep.lower_barriers.push_back(blo.barriers);
        rep.upper_barriers.push_back(bhi.barriers);
        rep.gaps.push_back(gap);
        if (opt.observer) opt.observer(rep.outer_iterations, lo, hi);
      }
      rep.gap = gap;
      GridFunction mid = lo;
      for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t k = 0; k <= op.n(); ++k) {
          mid.values[i][k] = 0.5 * (lo.values[i][k] + hi.values[i][k]);
          mid.slopes[i][k] = 0.5 * (lo.slopes[i][k] + hi.slopes[i][k]);
        }
      mid = detail::as_samples(std::move(mid));
      const auto choice = op.best_barrier(mid);
      res.value = op.apply(mid, choice.barriers);
      res.barriers = choice.barriers;
      res.smooth_fit = choice.smooth_fit;
      return res;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MaximumAtCap || attempt >= opt.max_cap_doublings) throw;
      cap *= 2.0;
    }
  }
}

struct HjbResidual {
  // Per regime, at interior nodes 1..n-1 (index k-1).
  std::vector<std::vector<double>> generator;
  std::vector<std::vector<double>> payout;  // 1 - V'
  std::vector<std::vector<double>> residual;
  double sup = 0.0;            // sup |max(generator, payout)|
  double max_generator = -INFINITY;
  double max_payout = -INFINITY;
};

namespace detail {

// V' and V'' at node k to O(h^4): centred five-point stencils inside,
// one-sided six-point ones at the first and last interior node. Second-order
// stencils are off by h^2 V''''/12, well above the residual tolerance when a
// root of the characteristic equation is large (steep value near 0).
inline std::pair<double, double> fourth_order_derivatives(const std::vector<double>& v, std::size_t k, double h) {
  const std::size_t n = v.size() - 1;
  if (n < 6) return {(v[k + 1] - v[k - 1]) / (2 * h), (v[k + 1] - 2 * v[k] + v[k - 1]) / (h * h)};
  if (k >= 2 && k + 2 <= n)
    return {(v[k - 2] - 8 * v[k - 1] + 8 * v[k + 1] - v[k + 2]) / (12 * h),
            (-v[k - 2] + 16 * v[k - 1] - 30 * v[k] + 16 * v[k + 1] - v[k + 2]) / (12 * h * h)};
  // Offsets 0..5 counted inwards from the end next to k.
  const long dir = k == 1 ? 1 : -1;
  const long e = k == 1 ? 0 : static_cast<long>(n);
  auto f = [&](long j) { return v[static_cast<std::size_t>(e + dir * j)]; };
  return {dir * (-3 * f(0) - 10 * f(1) + 18 * f(2) - 6 * f(3) + f(4)) / (12 * h),
          (10 * f(0) - 15 * f(1) - 4 * f(2) + 14 * f(3) - 6 * f(4) + f(5)) / (12 * h * h)};
}

}  // namespace detail

// max{ (1/2) s^2 V'' + mu V' - r V + sum_j q_ij (V_j - V_i), 1 - V' } by
// fourth-order differences on the grid.
inline HjbResidual hjb_residual(const GridFunction& v, const RegimeModel& m) {
  HjbResidual r;
  const std::size_t nr = m.size();
  const double h = v.h;
  r.generator.assign(nr, {});
  r.payout.assign(nr, {});
  r.residual.assign(nr, {});
  for (std::size_t i = 0; i < nr; ++i) {
    const auto& s = m.states[i];
    const auto& vi = v.values[i];
    for (std::size_t k = 1; k < v.n; ++k) {
      const auto [d1, d2] = detail::fourth_order_derivatives(vi, k, h);
      double gen = 0.5 * s.sigma * s.sigma * d2 + s.mu * d1 - s.discount * vi[k];
      for (std::size_t j = 0; j < nr; ++j)
        if (j != i) gen += m.generator[i][j] * (v.values[j][k] - vi[k]);
      const double pay = 1.0 - d1;
      const double res = std::max(gen, pay);
      r.generator[i].push_back(gen);
      r.payout[i].push_back(pay);
      r.residual[i].push_back(res);
      r.sup = std::max(r.sup, std::abs(res));
      r.max_generator = std::max(r.max_generator, gen);
      r.max_payout = std::max(r.max_payout, pay);
    }
  }
  return r;
}

}  // namespace regdiv
