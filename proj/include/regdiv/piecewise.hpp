#pragma once

#include <cmath>
#include <limits>
#include <vector>

namespace regdiv {

// coeff * exp(exponent * (x - x_ref))
struct ExpTerm {
  double coeff = 0.0;
  double exponent = 0.0;
  double x_ref = 0.0;

  // Coefficient of exp(exponent * x), i.e. with the reference point removed.
  double plain_coeff() const { return coeff * std::exp(-exponent * x_ref); }
};

// On [lo, hi]: sum of exponential terms plus slope * x + intercept.
struct Branch {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  std::vector<ExpTerm> terms;
  double slope = 0.0;
  double intercept = 0.0;

  double value(double x) const {
    double s = slope * x + intercept;
    for (const auto& t : terms) s += t.coeff * std::exp(t.exponent * (x - t.x_ref));
    return s;
  }
  double d1(double x) const {
    double s = slope;
    for (const auto& t : terms) s += t.coeff * t.exponent * std::exp(t.exponent * (x - t.x_ref));
    return s;
  }
  double d2(double x) const {
    double s = 0.0;
    for (const auto& t : terms) s += t.coeff * t.exponent * t.exponent * std::exp(t.exponent * (x - t.x_ref));
    return s;
  }
};

struct PiecewiseFunction {
  std::vector<Branch> branches;  // contiguous, ascending

  const Branch& at(double x) const {
    for (const auto& b : branches)
      if (x <= b.hi) return b;
    return branches.back();
  }
  double value(double x) const { return at(x).value(x); }
  double d1(double x) const { return at(x).d1(x); }
  double d2(double x) const { return at(x).d2(x); }
};

}  // namespace regdiv
