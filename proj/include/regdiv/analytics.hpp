#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "regdiv/error.hpp"
#include "regdiv/model.hpp"

namespace regdiv {

// Roots of (1/2) sigma^2 l^2 + mu l - q = 0, sorted.
struct RootPair {
  double lambda_minus = 0.0;
  double lambda_plus = 0.0;
};

inline RootPair characteristic_roots(double mu, double sigma, double q) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::DegenerateVolatility, "sigma must be > 0");
  const double s2 = sigma * sigma;
  const double a = mu / s2;
  const double c = 2.0 * q / s2;  // minus the product of the roots
  const double disc = std::sqrt(a * a + c);
  // Compute the root without cancellation first and recover the other from
  // the product.
  RootPair r;
  if (a >= 0.0) {
    r.lambda_minus = -a - disc;
    r.lambda_plus = r.lambda_minus != 0.0 ? -c / r.lambda_minus : 0.0;
  } else {
    r.lambda_plus = -a + disc;
    r.lambda_minus = r.lambda_plus != 0.0 ? -c / r.lambda_plus : 0.0;
  }
  return r;
}

// Scale function W^(q) of Brownian motion with drift mu and volatility sigma.
struct ScaleFunction {
  double mu = 0.0, sigma = 1.0, q = 0.0;
  double lm = 0.0, lp = 0.0;
  double k = 0.0;  // (2/sigma^2) / (lp - lm)

  ScaleFunction() = default;
  ScaleFunction(double mu_, double sigma_, double q_) : mu(mu_), sigma(sigma_), q(q_) {
    if (!(q > 0.0)) throw Error(ErrorCode::OutOfRange, "scale function needs q > 0");
    const auto r = characteristic_roots(mu, sigma, q);
    lm = r.lambda_minus;
    lp = r.lambda_plus;
    k = 2.0 / (sigma * sigma) / (lp - lm);
  }

  double value(double x) const { return k * std::exp(lm * x) * std::expm1((lp - lm) * x); }
  double d1(double x) const { return k * (lp * std::exp(lp * x) - lm * std::exp(lm * x)); }
  double d2(double x) const { return k * (lp * lp * std::exp(lp * x) - lm * lm * std::exp(lm * x)); }

  // Unique zero of W'' (exists when mu > 0).
  double inflection() const { return 2.0 * std::log(-lm / lp) / (lp - lm); }
};

namespace detail {

inline double classical_barrier_closed_form(double mu, double sigma, double r) {
  const double s2 = sigma * sigma;
  const double d = std::sqrt(mu * mu + 2.0 * r * s2);
  // (d + mu)/(d - mu) with the denominator rewritten to avoid cancellation.
  const double denom = 2.0 * r * s2 / (d + mu);
  return s2 / d * std::log((d + mu) / denom);
}

inline double bisect_w2_root(const ScaleFunction& w) {
  double lo = 0.0, hi = 1.0;
  while (w.d2(hi) <= 0.0) {
    hi *= 2.0;
    if (hi > 1e6) throw Error(ErrorCode::Internal, "W'' has no sign change");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (w.d2(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Classical de Finetti barrier for a single regime.
inline double single_regime_barrier(double mu, double sigma, double r) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::DegenerateVolatility, "sigma must be > 0");
  if (!(mu > 0.0)) throw Error(ErrorCode::NonPositiveDrift, "classical barrier needs mu > 0");
  if (!(r > 0.0)) throw Error(ErrorCode::NonPositiveDiscount, "classical barrier needs r > 0");
  const double a = detail::classical_barrier_closed_form(mu, sigma, r);
  const double b = detail::bisect_w2_root(ScaleFunction(mu, sigma, r));
  if (std::abs(a - b) > 1e-8 * std::max(1.0, a))
    throw Error(ErrorCode::Internal, "closed-form barrier disagrees with the W'' root");
  return a;
}

struct SingleRegimeSolution {
  double mu = 0.0, sigma = 1.0, r = 0.0;
  RootPair roots;
  ScaleFunction w;
  double barrier = 0.0;
  double w1_at_barrier = 0.0;

  double value(double x) const {
    if (x <= barrier) return w.value(x) / w1_at_barrier;
    return x - barrier + mu / r;
  }
  double derivative(double x) const { return x <= barrier ? w.d1(x) / w1_at_barrier : 1.0; }
  double second(double x) const { return x <= barrier ? w.d2(x) / w1_at_barrier : 0.0; }
};

inline SingleRegimeSolution single_regime_solution(double mu, double sigma, double r) {
  SingleRegimeSolution s;
  s.mu = mu;
  s.sigma = sigma;
  s.r = r;
  s.barrier = single_regime_barrier(mu, sigma, r);
  s.w = ScaleFunction(mu, sigma, r);
  s.roots = {s.w.lm, s.w.lp};
  s.w1_at_barrier = s.w.d1(s.barrier);
  return s;
}

inline double single_regime_value(double mu, double sigma, double r, double x) {
  if (x < 0.0) throw Error(ErrorCode::OutOfRange, "x must be >= 0");
  return single_regime_solution(mu, sigma, r).value(x);
}

// Discounted occupation density of the diffusion reflected at b and killed
// at 0 and at rate q, started from x.
inline double resolvent_density(double mu, double sigma, double q, double b, double x, double y) {
  if (x < 0.0 || x > b || y < 0.0 || y > b)
    throw Error(ErrorCode::OutOfRange, "resolvent density needs 0 <= x, y <= b");
  const ScaleFunction w(mu, sigma, q);
  double h = w.value(x) * w.d1(b - y) / w.d1(b);
  if (x >= y) h -= w.value(x - y);
  return h;
}

// Unit-volatility single-regime solutions bracketing the value function.
struct BoundPair {
  SingleRegimeSolution lower;
  SingleRegimeSolution upper;
};

inline BoundPair apriori_bounds(const RegimeModel& m) {
  double mu_lo = std::numeric_limits<double>::infinity(), mu_hi = -mu_lo;
  double r_lo = mu_lo, r_hi = -mu_lo;
  for (const auto& s : m.states) {
    if (!(s.mu > 0.0)) throw Error(ErrorCode::DriftHypothesisViolated, "a priori bounds need every mu_i > 0");
    const double s2 = s.sigma * s.sigma;
    mu_lo = std::min(mu_lo, s.mu / s2);
    mu_hi = std::max(mu_hi, s.mu / s2);
    r_lo = std::min(r_lo, s.discount / s2);
    r_hi = std::max(r_hi, s.discount / s2);
  }
  return {single_regime_solution(mu_lo, 1.0, r_hi), single_regime_solution(mu_hi, 1.0, r_lo)};
}

}  // namespace regdiv
