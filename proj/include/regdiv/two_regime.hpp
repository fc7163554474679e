#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "regdiv/analytics.hpp"
#include "regdiv/error.hpp"
#include "regdiv/linalg.hpp"
#include "regdiv/model.hpp"
#include "regdiv/piecewise.hpp"
#include "regdiv/quartic.hpp"
#include "regdiv/quasi_newton.hpp"

namespace regdiv {

struct PositiveCaseSolution {
  std::array<double, 2> barriers{};
  std::size_t lower = 0;  // regime with the smaller barrier
  bool swapped = false;   // true when regime 1 carries the smaller barrier
  QuarticRoots roots;
  std::array<ExpTerm, 4> coeffs{};  // d_k, stored with per-root reference points
  std::array<PiecewiseFunction, 2> value;
  double residual = INFINITY;        // smooth-fit equations, infinity norm
  double system_residual = INFINITY;  // |A d - h|, infinity norm
  std::size_t iterations = 0;

  double evaluate(double x, std::size_t regime) const { return value[regime].value(x); }
};

struct NegativeCaseSolution {
  std::size_t negative = 0;  // regime with mu < 0 (carries the liquidation level)
  double d = 0.0;
  std::array<double, 2> barriers{};
  QuarticRoots roots;
  std::array<ExpTerm, 4> coeffs{};  // B_k with reference points
  double alpha = 0.0, gamma = 0.0, phi = 0.0;
  std::array<double, 2> beta{}, delta{};
  std::array<PiecewiseFunction, 2> value;
  double residual = INFINITY;
  double system_residual = INFINITY;
  std::size_t iterations = 0;

  double evaluate(double x, std::size_t regime) const { return value[regime].value(x); }
};

// Optimal policy when continuing is never worth it in the negative-drift
// regime: pay everything there at once, barrier-pay in the other regime.
struct LiquidateEverywhereSolution {
  std::size_t negative = 0;
  double barrier = 0.0;  // barrier of the positive-drift regime
  std::array<PiecewiseFunction, 2> value;

  double evaluate(double x, std::size_t regime) const { return value[regime].value(x); }
};

struct LiquidationDiagnostic {
  std::array<double, 2> delta{};  // +infinity marks "liquidate at every level"
};

using ValueFn = std::function<double(std::size_t, double)>;

namespace detail {

inline std::array<double, 4> reference_points(const QuarticRoots& r, double neg_ref, double pos_ref) {
  std::array<double, 4> ref{};
  for (int k = 0; k < 4; ++k) ref[k] = r.lambda[k] < 0.0 ? neg_ref : pos_ref;
  return ref;
}

// Band solution in regime j above the other regime's barrier, where the other
// regime's value is x + K: the homogeneous part is pinned by V'(bj)=1 and
// V''(bj)=0.
struct BandForm {
  double l1 = 0.0, l2 = 0.0, k1 = 0.0, k2 = 0.0, k3 = 0.0, k4 = 0.0, bj = 0.0;

  BandForm(const RegimeModel& m, std::size_t j, double bj_, double K) : bj(bj_) {
    const auto& s = m.states[j];
    const double q = m.generator[j][j], c = s.discount;
    const auto r = characteristic_roots(s.mu, s.sigma, c - q);
    l1 = r.lambda_minus;
    l2 = r.lambda_plus;
    const double sc = c / (c - q);
    k1 = sc * l2 / (l1 * (l2 - l1));
    k2 = sc * l1 / (l2 * (l1 - l2));
    k3 = q / (q - c);
    k4 = (q * (q - c) * K - s.mu * q) / ((q - c) * (q - c));
  }
  double value(double x) const { return k1 * std::exp(l1 * (x - bj)) + k2 * std::exp(l2 * (x - bj)) + k3 * x + k4; }
  double d1(double x) const { return k1 * l1 * std::exp(l1 * (x - bj)) + k2 * l2 * std::exp(l2 * (x - bj)) + k3; }
  double d2(double x) const {
    return k1 * l1 * l1 * std::exp(l1 * (x - bj)) + k2 * l2 * l2 * std::exp(l2 * (x - bj));
  }
  Branch branch(double lo, double hi) const { return {lo, hi, {{k1, l1, bj}, {k2, l2, bj}}, k3, k4}; }
};

struct PositiveSystem {
  std::array<double, 4> d{}, ref{};
  Vec<2> residual{};
  double system_residual = 0.0;
};

// Regime i has the lower barrier bi. Below bi both regimes continue and
// V_i = sum d_k e^{l_k x}, V_j = q_ii^{-1} F_i(D) V_i. The 4x4 system pins
// V_i(0) = V_j(0) = 0, V_i'(bi) = 1, V_i''(bi) = 0; the residuals are the
// jumps of V_j' and V_j'' at bi against the band solution.
inline PositiveSystem positive_system(const RegimeModel& m, const QuarticRoots& r, std::size_t i, double bi,
                                      double bj) {
  const std::size_t j = 1 - i;
  const double qii = m.generator[i][i];
  PositiveSystem ps;
  ps.ref = reference_points(r, 0.0, bi);
  Mat<4> a{};
  std::array<double, 4> F{}, e0{}, eb{};
  for (int k = 0; k < 4; ++k) {
    const double l = r.lambda[k];
    F[k] = regime_poly(m, i, l);
    e0[k] = std::exp(l * (0.0 - ps.ref[k]));
    eb[k] = std::exp(l * (bi - ps.ref[k]));
    a[0][k] = e0[k];
    a[1][k] = F[k] * e0[k];
    a[2][k] = l * eb[k];
    a[3][k] = l * l * eb[k];
  }
  const Vec<4> h{0.0, 0.0, 1.0, 0.0};
  const auto d = solve_linear<4>(a, h);
  double vj1 = 0.0, vj2 = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double l = r.lambda[k];
    vj1 += d[k] * F[k] * l * eb[k] / qii;
    vj2 += d[k] * F[k] * l * l * eb[k] / qii;
    ps.d[k] = d[k];
  }
  for (int row = 0; row < 4; ++row) {
    double s = -h[row];
    for (int k = 0; k < 4; ++k) s += a[row][k] * d[k];
    ps.system_residual = std::max(ps.system_residual, std::abs(s));
  }
  // K does not enter the derivatives of the band form.
  const BandForm band(m, j, bj, 0.0);
  ps.residual = {vj1 - band.d1(bi), vj2 - band.d2(bi)};
  return ps;
}

inline double start_barrier(const RegimeModel& m, std::size_t i) {
  const auto& s = m.states[i];
  if (s.mu > 0.0) return single_regime_barrier(s.mu, s.sigma, s.discount);
  const auto& o = m.states[1 - i];
  return single_regime_barrier(o.mu, o.sigma, o.discount);
}

// Multiplicative perturbations for restarts, fixed so runs are reproducible.
inline constexpr std::array<std::array<double, 3>, 8> kJitter{{{0.9, 1.1, 1.0},
                                                                 {1.1, 0.9, 1.05},
                                                                 {0.75, 1.25, 0.9},
                                                                 {1.3, 0.8, 1.2},
                                                                 {0.5, 1.5, 0.8},
                                                                 {1.6, 0.6, 1.4},
                                                                 {0.35, 1.8, 0.7},
                                                                 {2.0, 0.4, 1.6}}};

}  // namespace detail

// Both barriers for a two-regime model in which both regimes pay at a barrier
// and never liquidate. Tries regime 0 as the lower-barrier regime first.
inline PositiveCaseSolution solve_barrier_pair(const RegimeModel& m, double tol = 1e-10) {
  require_two_regimes(m);
  const auto roots = quartic_roots(m);
  NewtonOptions opt;
  opt.tol = tol;
  std::string failures;
  for (std::size_t i : {std::size_t{0}, std::size_t{1}}) {
    const std::size_t j = 1 - i;
    auto f = [&](const Vec<2>& b) -> Vec<2> {
      if (!(b[0] > 0.0) || !(b[1] > 0.0)) return {INFINITY, INFINITY};
      return detail::positive_system(m, roots, i, b[0], b[1]).residual;
    };
    const Vec<2> x0{detail::start_barrier(m, i), detail::start_barrier(m, j)};
    for (std::size_t attempt = 0; attempt <= detail::kJitter.size(); ++attempt) {
      Vec<2> x = x0;
      if (attempt > 0) {
        x[0] *= detail::kJitter[attempt - 1][0];
        x[1] *= detail::kJitter[attempt - 1][1];
      }
      const auto r = quasi_newton<2>(f, x, opt);
      if (!r.converged) continue;
      const double bi = r.x[0], bj = r.x[1];
      if (!(bi > 0.0 && bi <= bj)) {
        failures += " labeling " + std::to_string(i) + " gave b_lower=" + std::to_string(bi) +
                    " b_upper=" + std::to_string(bj) + ";";
        continue;
      }
      const auto ps = detail::positive_system(m, roots, i, bi, bj);
      PositiveCaseSolution s;
      s.lower = i;
      s.swapped = (i == 1);
      s.barriers[i] = bi;
      s.barriers[j] = bj;
      s.roots = roots;
      s.residual = r.residual_norm;
      s.system_residual = ps.system_residual;
      s.iterations = r.iterations;
      Branch bi_low{0.0, bi, {}, 0.0, 0.0}, bj_low{0.0, bi, {}, 0.0, 0.0};
      const double qii = m.generator[i][i];
      for (int k = 0; k < 4; ++k) {
        const double l = roots.lambda[k];
        s.coeffs[k] = {ps.d[k], l, ps.ref[k]};
        bi_low.terms.push_back({ps.d[k], l, ps.ref[k]});
        bj_low.terms.push_back({ps.d[k] * regime_poly(m, i, l) / qii, l, ps.ref[k]});
      }
      const double vib = bi_low.value(bi);
      s.value[i].branches = {bi_low, {bi, INFINITY, {}, 1.0, vib - bi}};
      const detail::BandForm band(m, j, bj, vib - bi);
      const double vjb = band.value(bj);
      s.value[j].branches = {bj_low, band.branch(bi, bj), {bj, INFINITY, {}, 1.0, vjb - bj}};
      return s;
    }
  }
  throw Error(ErrorCode::OrderingUnresolved, "no labeling produced a consistent barrier pair;" + failures);
}

inline PositiveCaseSolution solve_positive(const RegimeModel& m, double tol = 1e-10) {
  require_two_regimes(m);
  if (drift_sign_case(m) != DriftCase::AllPositive)
    throw Error(ErrorCode::DriftHypothesisViolated, "positive case needs mu_0, mu_1 > 0");
  return solve_barrier_pair(m, tol);
}

// Y_i(x) = mu_i - c_i x + sum_{j != i} q_ij (V_j(x) - x)
inline double liquidation_indicator(const RegimeModel& m, const ValueFn& v, std::size_t i, double x) {
  double y = m.states[i].mu - m.states[i].discount * x;
  for (std::size_t j = 0; j < m.size(); ++j)
    if (j != i) y += m.generator[i][j] * (v(j, x) - x);
  return y;
}

// Delta_i = inf{x >= 0 : Y_i(x) > 0} by grid scan and bisection.
inline LiquidationDiagnostic liquidation_levels(const RegimeModel& m, const ValueFn& v, double x_cap = 4.0,
                                                double step = 1e-3) {
  require_two_regimes(m);
  LiquidationDiagnostic out;
  for (std::size_t i = 0; i < 2; ++i) {
    auto y = [&](double x) { return liquidation_indicator(m, v, i, x); };
    double cap = x_cap;
    double found = INFINITY;
    double prev_x = 0.0;
    if (y(0.0) > 0.0) {
      out.delta[i] = 0.0;
      continue;
    }
    for (int round = 0; round < 6 && !std::isfinite(found); ++round, cap *= 2.0) {
      for (double x = prev_x + step; x <= cap + 0.5 * step; x += step) {
        if (y(x) > 0.0) {
          double lo = x - step, hi = x;
          for (int it = 0; it < 100 && hi - lo > 1e-13; ++it) {
            const double mid = 0.5 * (lo + hi);
            (y(mid) > 0.0 ? hi : lo) = mid;
          }
          found = hi;
          break;
        }
        prev_x = x;
      }
      if (!std::isfinite(found) && y(cap) < y(cap - step)) break;  // decreasing: never turns positive
    }
    out.delta[i] = found;
  }
  return out;
}

inline LiquidateEverywhereSolution liquidate_everywhere_candidate(const RegimeModel& m) {
  require_two_regimes(m);
  LiquidateEverywhereSolution s;
  s.negative = m.states[0].mu <= 0.0 ? 0 : 1;
  const std::size_t p = 1 - s.negative;
  if (!(m.states[p].mu > 0.0))
    throw Error(ErrorCode::DriftHypothesisViolated, "liquidate-everywhere candidate needs one positive drift");
  // Regime p on [0, b]: band form against V_neg(x) = x, fixed by V_p(0) = 0.
  auto v0 = [&](double b) { return detail::BandForm(m, p, b, 0.0).value(0.0); };
  double lo = 0.0, hi = 1.0;
  while (v0(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e4) throw Error(ErrorCode::NoConvergence, "no barrier for the liquidate-everywhere candidate");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (v0(mid) > 0.0 ? lo : hi) = mid;
  }
  s.barrier = 0.5 * (lo + hi);
  const detail::BandForm band(m, p, s.barrier, 0.0);
  s.value[s.negative].branches = {{0.0, INFINITY, {}, 1.0, 0.0}};
  s.value[p].branches = {band.branch(0.0, s.barrier), {s.barrier, INFINITY, {}, 1.0, band.value(s.barrier) - s.barrier}};
  return s;
}

namespace detail {

struct NegativeSystem {
  std::array<double, 4> B{}, ref{};
  Vec<3> residual{};
  double system_residual = 0.0;
  double alpha = 0.0, beta0 = 0.0, beta1 = 0.0, gamma = 0.0, phi = 0.0, den = 0.0;
  std::array<double, 2> delta{}, l0{}, l1{};
};

// Mixed case with regime 0 negative (the model passed here is relabelled so
// that this holds). Unknowns (d, b0, b1) with d < b1 < b0. Residuals are the
// three matching conditions: V_1' at d, V_0' and V_0'' at b1.
inline NegativeSystem negative_system(const RegimeModel& m, const QuarticRoots& r, double d, double b0, double b1) {
  NegativeSystem ns;
  const auto& s0 = m.states[0];
  const auto& s1 = m.states[1];
  const double q00 = m.generator[0][0], q11 = m.generator[1][1];
  const double c0 = s0.discount, c1 = s1.discount;
  ns.ref = reference_points(r, d, b1);
  Mat<4> a{};
  std::array<double, 4> F{}, ed{}, eb{};
  for (int k = 0; k < 4; ++k) {
    const double l = r.lambda[k];
    F[k] = regime_poly(m, 0, l);
    ed[k] = std::exp(l * (d - ns.ref[k]));
    eb[k] = std::exp(l * (b1 - ns.ref[k]));
    a[0][k] = ed[k];
    a[1][k] = l * ed[k];
    a[2][k] = F[k] * l * eb[k];
    a[3][k] = F[k] * l * l * eb[k];
  }
  const Vec<4> h{d, 1.0, q00, 0.0};
  const auto B = solve_linear<4>(a, h);
  for (int row = 0; row < 4; ++row) {
    double s = -h[row];
    for (int k = 0; k < 4; ++k) s += a[row][k] * B[k];
    ns.system_residual = std::max(ns.system_residual, std::abs(s));
  }
  double v0b1 = 0, v0b2 = 0, v1b = 0, v1d1 = 0, v1d2 = 0;
  for (int k = 0; k < 4; ++k) {
    const double l = r.lambda[k];
    ns.B[k] = B[k];
    v0b1 += B[k] * l * eb[k];
    v0b2 += B[k] * l * l * eb[k];
    v1b += B[k] * F[k] * eb[k] / q00;
    v1d1 += B[k] * F[k] * l * ed[k] / q00;
    v1d2 += B[k] * F[k] * l * l * ed[k] / q00;
  }
  const auto r0 = characteristic_roots(s0.mu, s0.sigma, c0 - q00);
  const auto r1 = characteristic_roots(s1.mu, s1.sigma, c1 - q11);
  ns.l0 = {r0.lambda_minus, r0.lambda_plus};
  ns.l1 = {r1.lambda_minus, r1.lambda_plus};
  ns.alpha = ns.l0[1] / (ns.l0[1] - ns.l0[0]);
  ns.beta0 = -q00 / (c0 - q00);
  ns.beta1 = -q11 / (c1 - q11);
  ns.gamma = v1b - b1 - s0.mu / (q00 - c0);
  // Upper V_0 on [b1, b0] and its derivatives at b1.
  const double e1 = std::exp(ns.l0[0] * (b1 - b0)), e2 = std::exp(ns.l0[1] * (b1 - b0));
  const double up1 = (1 - ns.beta0) * (ns.alpha * e1 + (1 - ns.alpha) * e2) + ns.beta0;
  const double up2 = (1 - ns.beta0) * (ns.alpha * ns.l0[0] * e1 + (1 - ns.alpha) * ns.l0[1] * e2);
  // Lower V_1 on [0, d]: V_1(0) = 0 and V_1'' continuous at d.
  const double K = s1.mu / (c1 - q11);
  const double a1 = std::exp(ns.l1[0] * d), a2 = std::exp(ns.l1[1] * d);
  ns.den = ns.l1[0] * ns.l1[0] * a1 - ns.l1[1] * ns.l1[1] * a2;
  ns.phi = ns.den;
  ns.delta = {ns.beta1 * K * ns.l1[0] * ns.l1[0] * a1 + v1d2, ns.beta1 * K * ns.l1[1] * ns.l1[1] * a2 + v1d2};
  const double low1 = (ns.delta[1] * ns.l1[0] * a1 - ns.delta[0] * ns.l1[1] * a2) / ns.den + ns.beta1;
  ns.residual = {low1 - v1d1, v0b1 - up1, v0b2 - up2};
  return ns;
}

inline RegimeModel swap_regimes(const RegimeModel& m) {
  RegimeModel s;
  s.states = {m.states[1], m.states[0]};
  s.generator = {{m.generator[1][1], m.generator[1][0]}, {m.generator[0][1], m.generator[0][0]}};
  return s;
}

}  // namespace detail

// Liquidation-dividend solution for mu_neg < 0 < mu_pos. The negative regime
// pays everything out below d, both regimes pay at their barriers, and the
// smooth-fit system is solved under the ordering b_pos < b_neg.
inline NegativeCaseSolution solve_negative(const RegimeModel& model, double tol = 1e-10) {
  require_two_regimes(model);
  std::size_t neg;
  if (model.states[0].mu < 0.0 && model.states[1].mu > 0.0)
    neg = 0;
  else if (model.states[1].mu < 0.0 && model.states[0].mu > 0.0)
    neg = 1;
  else
    throw Error(ErrorCode::DriftHypothesisViolated, "mixed case needs one negative and one positive drift");
  const std::size_t pos = 1 - neg;

  const auto cand = liquidate_everywhere_candidate(model);
  const auto diag = liquidation_levels(model, [&](std::size_t j, double x) { return cand.evaluate(x, j); });
  if (!std::isfinite(diag.delta[neg]))
    throw Error(ErrorCode::LiquidateEverywhere,
                "continuing never pays in regime " + std::to_string(neg) + "; liquidate at every reserve level");

  const RegimeModel m = neg == 0 ? model : detail::swap_regimes(model);
  const auto roots = quartic_roots(m);
  const auto th = effective_rates(m);
  const double a1 = single_regime_barrier(m.states[1].mu, m.states[1].sigma, th[1]);
  auto f = [&](const Vec<3>& x) -> Vec<3> { return detail::negative_system(m, roots, x[0], x[1], x[2]).residual; };
  NewtonOptions opt;
  opt.tol = tol;
  const Vec<3> x0{0.05 * a1, 1.2 * a1, a1};
  std::string seen;
  for (std::size_t attempt = 0; attempt <= detail::kJitter.size(); ++attempt) {
    Vec<3> x = x0;
    if (attempt > 0)
      for (int c = 0; c < 3; ++c) x[c] *= detail::kJitter[attempt - 1][c];
    const auto r = quasi_newton<3>(f, x, opt);
    if (!r.converged) continue;
    const double d = r.x[0], b0 = r.x[1], b1 = r.x[2];
    if (!(d > 0.0 && d < b1 && b1 < b0)) {
      const std::string root =
          " (d=" + std::to_string(d) + ", b_neg=" + std::to_string(b0) + ", b_pos=" + std::to_string(b1) + ")";
      if (seen.find(root) == std::string::npos) seen += root;
      continue;
    }
    const auto ns = detail::negative_system(m, roots, d, b0, b1);
    NegativeCaseSolution s;
    s.negative = neg;
    s.d = d;
    s.barriers[neg] = b0;
    s.barriers[pos] = b1;
    s.roots = roots;
    s.alpha = ns.alpha;
    s.beta = {ns.beta0, ns.beta1};
    s.gamma = ns.gamma;
    s.delta = ns.delta;
    s.phi = ns.phi;
    s.residual = r.residual_norm;
    s.system_residual = ns.system_residual;
    s.iterations = r.iterations;
    const double q00 = m.generator[0][0];
    Branch v0_mid{d, b1, {}, 0.0, 0.0}, v1_mid{d, b1, {}, 0.0, 0.0};
    for (int k = 0; k < 4; ++k) {
      const double l = roots.lambda[k];
      s.coeffs[k] = {ns.B[k], l, ns.ref[k]};
      v0_mid.terms.push_back({ns.B[k], l, ns.ref[k]});
      v1_mid.terms.push_back({ns.B[k] * regime_poly(m, 0, l) / q00, l, ns.ref[k]});
    }
    const double w = 1.0 - ns.beta0;
    Branch v0_up{b1, b0,
                 {{w * ns.alpha / ns.l0[0], ns.l0[0], b0}, {w * (1 - ns.alpha) / ns.l0[1], ns.l0[1], b0}},
                 ns.beta0, ns.beta0 * ns.gamma};
    const double K = m.states[1].mu / (m.states[1].discount - m.generator[1][1]);
    Branch v1_low{0.0, d,
                  {{ns.delta[1] / ns.den, ns.l1[0], 0.0}, {-ns.delta[0] / ns.den, ns.l1[1], 0.0}},
                  ns.beta1, ns.beta1 * K};
    s.value[neg].branches = {{0.0, d, {}, 1.0, 0.0}, v0_mid, v0_up, {b0, INFINITY, {}, 1.0, v0_up.value(b0) - b0}};
    s.value[pos].branches = {v1_low, v1_mid, {b1, INFINITY, {}, 1.0, v1_mid.value(b1) - b1}};
    return s;
  }
  throw Error(ErrorCode::OrderingUnresolved,
              "liquidation system has no root with 0 < d < b_pos < b_neg from the standard starts" +
                  (seen.empty() ? std::string{} : "; inadmissible roots:" + seen));
}

}  // namespace regdiv
