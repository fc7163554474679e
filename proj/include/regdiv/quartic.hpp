#pragma once

#include <array>
#include <cmath>

#include "regdiv/analytics.hpp"
#include "regdiv/error.hpp"
#include "regdiv/model.hpp"

namespace regdiv {

// F_k(l) = (1/2) sigma_k^2 l^2 + mu_k l + q_kk - c_k
inline double regime_poly(const RegimeModel& m, std::size_t k, double l) {
  const auto& s = m.states[k];
  return 0.5 * s.sigma * s.sigma * l * l + s.mu * l + m.generator[k][k] - s.discount;
}

inline double regime_poly_d(const RegimeModel& m, std::size_t k, double l) {
  const auto& s = m.states[k];
  return s.sigma * s.sigma * l + s.mu;
}

// F_{0,1}(l) = F_0(l) F_1(l) - q_00 q_11
inline double coupled_poly(const RegimeModel& m, double l) {
  return regime_poly(m, 0, l) * regime_poly(m, 1, l) - m.generator[0][0] * m.generator[1][1];
}

inline double coupled_poly_d(const RegimeModel& m, double l) {
  return regime_poly_d(m, 0, l) * regime_poly(m, 1, l) + regime_poly(m, 0, l) * regime_poly_d(m, 1, l);
}

struct QuarticRoots {
  std::array<double, 4> lambda{};
};

inline void require_two_regimes(const RegimeModel& m) {
  if (m.size() != 2) throw Error(ErrorCode::DimensionMismatch, "closed forms need exactly two regimes");
}

namespace detail {

// Newton steps kept inside a sign-change bracket, bisection otherwise.
inline double bracketed_root(const RegimeModel& m, double lo, double hi) {
  double flo = coupled_poly(m, lo), fhi = coupled_poly(m, hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) throw Error(ErrorCode::RootIsolationFailure, "bracket without a sign change");
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 300; ++it) {
    const double fx = coupled_poly(m, x);
    if (fx == 0.0) return x;
    ((fx > 0) == (flo > 0) ? lo : hi) = x;
    if ((fx > 0) == (flo > 0)) flo = fx;
    const double d = coupled_poly_d(m, x);
    double nx = d != 0.0 ? x - fx / d : 0.5 * (lo + hi);
    if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
    if (std::abs(nx - x) <= 4e-16 * std::max(1.0, std::abs(x)) || hi - lo <= 4e-16 * std::max(1.0, std::abs(x)))
      return nx;
    x = nx;
  }
  return x;
}

}  // namespace detail

// The four real zeros of F_{0,1}. With l_1^k < 0 < l_2^k the zeros of F_k,
// F_{0,1} is positive at +-inf and at 0 and negative at every l^k_j, which
// isolates one root in each of the four brackets below.
inline QuarticRoots quartic_roots(const RegimeModel& m) {
  require_two_regimes(m);
  const double q00 = m.generator[0][0], q11 = m.generator[1][1];
  if (!(q00 * q11 > 0.0)) throw Error(ErrorCode::RootIsolationFailure, "both regimes must be transient (q_ii < 0)");
  const auto th = effective_rates(m);
  const auto r0 = characteristic_roots(m.states[0].mu, m.states[0].sigma, th[0]);
  const auto r1 = characteristic_roots(m.states[1].mu, m.states[1].sigma, th[1]);
  const double neg_lo = std::min(r0.lambda_minus, r1.lambda_minus);
  const double neg_hi = std::max(r0.lambda_minus, r1.lambda_minus);
  const double pos_lo = std::min(r0.lambda_plus, r1.lambda_plus);
  const double pos_hi = std::max(r0.lambda_plus, r1.lambda_plus);
  double left = neg_lo - 1.0, right = pos_hi + 1.0;
  for (int k = 0; coupled_poly(m, left) <= 0.0; ++k) {
    if (k > 200) throw Error(ErrorCode::RootIsolationFailure, "no left bracket");
    left = neg_lo - 2.0 * (neg_lo - left);
  }
  for (int k = 0; coupled_poly(m, right) <= 0.0; ++k) {
    if (k > 200) throw Error(ErrorCode::RootIsolationFailure, "no right bracket");
    right = pos_hi + 2.0 * (right - pos_hi);
  }
  QuarticRoots q;
  q.lambda[0] = detail::bracketed_root(m, left, neg_lo);
  q.lambda[1] = detail::bracketed_root(m, neg_hi, 0.0);
  q.lambda[2] = detail::bracketed_root(m, 0.0, pos_lo);
  q.lambda[3] = detail::bracketed_root(m, pos_hi, right);
  return q;
}

}  // namespace regdiv
