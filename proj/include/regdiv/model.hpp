#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "regdiv/error.hpp"

namespace regdiv {

// One regime of the modulating chain. The discount field doubles as the
// rate written c_i in the two-regime formulas.
struct RegimeParams {
  double mu = 0.0;
  double sigma = 0.0;
  double discount = 0.0;
};

struct RegimeModel {
  std::vector<RegimeParams> states;
  std::vector<std::vector<double>> generator;  // row i, column j = q_ij

  std::size_t size() const { return states.size(); }
  double q(std::size_t i, std::size_t j) const { return generator[i][j]; }
};

enum class DriftCase { AllPositive, MixedSign, AllNonPositive };

inline const char* to_string(DriftCase c) {
  switch (c) {
    case DriftCase::AllPositive: return "AllPositive";
    case DriftCase::MixedSign: return "MixedSign";
    case DriftCase::AllNonPositive: return "AllNonPositive";
  }
  return "Unknown";
}

inline constexpr double kRowSumTolerance = 1e-12;

// Checks every invariant and returns a copy whose diagonal is re-normalised
// to q_ii = -sum_{j != i} q_ij.
inline RegimeModel validate(const RegimeModel& raw) {
  const std::size_t n = raw.states.size();
  if (n == 0) throw Error(ErrorCode::DimensionMismatch, "model has no states");
  if (raw.generator.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "generator has " + std::to_string(raw.generator.size()) +
                                                  " rows, expected " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = raw.states[i];
    const std::string tag = "state " + std::to_string(i);
    if (!std::isfinite(s.mu)) throw Error(ErrorCode::Parse, tag + ": mu is not finite");
    if (!(s.sigma > 0.0) || !std::isfinite(s.sigma))
      throw Error(ErrorCode::NonPositiveVolatility, tag + ": sigma must be > 0");
    if (!(s.discount > 0.0) || !std::isfinite(s.discount))
      throw Error(ErrorCode::NonPositiveDiscount, tag + ": discount must be > 0");
    if (raw.generator[i].size() != n)
      throw Error(ErrorCode::DimensionMismatch, "generator row " + std::to_string(i) + " has wrong length");
  }
  RegimeModel m = raw;
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = raw.generator[i][j];
      if (!std::isfinite(v)) throw Error(ErrorCode::Parse, "generator entry is not finite");
      if (j == i) continue;
      if (v < 0.0)
        throw Error(ErrorCode::NegativeOffDiagonal,
                    "q_" + std::to_string(i) + std::to_string(j) + " = " + std::to_string(v));
      off += v;
    }
    const double diag = raw.generator[i][i];
    if (diag > 0.0) throw Error(ErrorCode::BadGeneratorRowSum, "positive diagonal in row " + std::to_string(i));
    if (std::abs(diag + off) > kRowSumTolerance)
      throw Error(ErrorCode::BadGeneratorRowSum, "row " + std::to_string(i) + " sums to " + std::to_string(diag + off));
    m.generator[i][i] = -off;
  }
  return m;
}

// theta_i = r_i - q_ii: discount plus the rate of leaving regime i.
inline std::vector<double> effective_rates(const RegimeModel& m) {
  std::vector<double> th(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) th[i] = m.states[i].discount - m.generator[i][i];
  return th;
}

inline DriftCase drift_sign_case(const RegimeModel& m) {
  bool pos = false, nonpos = false;
  for (const auto& s : m.states) (s.mu > 0.0 ? pos : nonpos) = true;
  if (pos && !nonpos) return DriftCase::AllPositive;
  if (pos) return DriftCase::MixedSign;
  return DriftCase::AllNonPositive;
}

// Largest row ratio sum_{j != i} q_ij / theta_i, the contraction factor of T_b.
inline double contraction_constant(const RegimeModel& m) {
  const auto th = effective_rates(m);
  double c = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) c = std::max(c, -m.generator[i][i] / th[i]);
  return c;
}

inline RegimeModel make_two_regime(RegimeParams a, double q00, RegimeParams b, double q11) {
  RegimeModel m;
  m.states = {a, b};
  m.generator = {{q00, -q00}, {-q11, q11}};
  return validate(m);
}

inline RegimeModel make_single_regime(double mu, double sigma, double r) {
  RegimeModel m;
  m.states = {{mu, sigma, r}};
  m.generator = {{0.0}};
  return validate(m);
}

}  // namespace regdiv
