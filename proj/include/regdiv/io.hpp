#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regdiv/error.hpp"
#include "regdiv/fixedpoint.hpp"
#include "regdiv/model.hpp"
#include "regdiv/montecarlo.hpp"
#include "regdiv/piecewise.hpp"
#include "regdiv/two_regime.hpp"

namespace regdiv {

using json = nlohmann::json;

// Every float leaving the library carries 9 significant digits.
inline double round9(double x) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return std::strtod(buf, nullptr);
}

inline std::string fmt9(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

// Rounds all numbers in place; infinities become the strings "inf"/"-inf"
// since JSON has no literal for them.
inline void round_numbers(json& j) {
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isinf(v))
      j = v > 0 ? "inf" : "-inf";
    else
      j = round9(v);
  } else if (j.is_structured()) {
    for (auto& e : j) round_numbers(e);
  }
}

inline std::string dump(json j) {
  round_numbers(j);
  return j.dump(2) + "\n";
}

// ---- model files ----

inline RegimeModel model_from_json(const json& j) {
  RegimeModel raw;
  try {
    if (!j.is_object()) throw Error(ErrorCode::Parse, "model must be a JSON object");
    for (const auto& s : j.at("states")) raw.states.push_back({s.at("mu").get<double>(), s.at("sigma").get<double>(),
                                                               s.at("discount").get<double>()});
    for (const auto& row : j.at("generator")) raw.generator.push_back(row.get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("model file: ") + e.what());
  }
  return validate(raw);
}

inline RegimeModel parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("model file: ") + e.what());
  }
  return model_from_json(j);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Parse, "cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline RegimeModel load_model(const std::string& path) { return parse_model(read_file(path)); }

inline json to_json(const RegimeModel& m) {
  json states = json::array();
  for (const auto& s : m.states) states.push_back({{"mu", s.mu}, {"sigma", s.sigma}, {"discount", s.discount}});
  return {{"states", states}, {"generator", m.generator}};
}

inline std::string serialize(const RegimeModel& m) { return dump(to_json(m)); }

// ---- policies ----

inline json to_json(const BarrierPolicy& p) {
  json j{{"barriers", p.barriers}};
  if (!p.liquidation.empty()) j["liquidation"] = p.liquidation;
  return j;
}

inline BarrierPolicy policy_from_json(const json& j) {
  BarrierPolicy p;
  try {
    const json& src = j.contains("policy") ? j.at("policy") : j;
    p.barriers = src.at("barriers").get<std::vector<double>>();
    if (src.contains("liquidation")) p.liquidation = src.at("liquidation").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("policy: ") + e.what());
  }
  return p;
}

inline BarrierPolicy load_policy(const std::string& path) {
  try {
    return policy_from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("policy file: ") + e.what());
  }
}

// ---- value functions ----

inline void write_grid_csv(const GridFunction& f, std::ostream& out) {
  out << "regime,x,value,derivative\n";
  for (std::size_t i = 0; i < f.regimes(); ++i)
    for (std::size_t k = 0; k <= f.n; ++k)
      out << i << ',' << fmt9(k * f.h) << ',' << fmt9(f.values[i][k]) << ',' << fmt9(f.slopes[i][k]) << '\n';
}

// Closed-form value functions sampled on the grid k h, k = 0..n.
inline void write_piecewise_csv(const std::vector<const PiecewiseFunction*>& v, double h, std::size_t n,
                                std::ostream& out) {
  out << "regime,x,value,derivative\n";
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t k = 0; k <= n; ++k) {
      const double x = k * h;
      out << i << ',' << fmt9(x) << ',' << fmt9(v[i]->value(x)) << ',' << fmt9(v[i]->d1(x)) << '\n';
    }
}

inline json to_json(const ExpTerm& t) { return {{"coeff", t.coeff}, {"exponent", t.exponent}, {"x_ref", t.x_ref}}; }

inline json to_json(const PiecewiseFunction& f) {
  json out = json::array();
  for (const auto& b : f.branches) {
    json terms = json::array();
    for (const auto& t : b.terms) terms.push_back(to_json(t));
    out.push_back({{"lo", b.lo}, {"hi", b.hi}, {"terms", terms}, {"slope", b.slope}, {"intercept", b.intercept}});
  }
  return out;
}

inline json to_json(const QuarticRoots& r) { return std::vector<double>(r.lambda.begin(), r.lambda.end()); }

inline json to_json(const PositiveCaseSolution& s) {
  json coeffs = json::array();
  for (const auto& c : s.coeffs) coeffs.push_back(to_json(c));
  return {{"barriers", s.barriers},
          {"lower_regime", s.lower},
          {"swapped", s.swapped},
          {"roots", to_json(s.roots)},
          {"coefficients", coeffs},
          {"value", {to_json(s.value[0]), to_json(s.value[1])}},
          {"residual", s.residual},
          {"system_residual", s.system_residual},
          {"iterations", s.iterations}};
}

inline json to_json(const NegativeCaseSolution& s) {
  json coeffs = json::array();
  for (const auto& c : s.coeffs) coeffs.push_back(to_json(c));
  return {{"negative_regime", s.negative},
          {"liquidation", s.d},
          {"barriers", s.barriers},
          {"roots", to_json(s.roots)},
          {"coefficients", coeffs},
          {"alpha", s.alpha},
          {"beta", s.beta},
          {"gamma", s.gamma},
          {"delta", s.delta},
          {"phi", s.phi},
          {"value", {to_json(s.value[0]), to_json(s.value[1])}},
          {"residual", s.residual},
          {"system_residual", s.system_residual},
          {"iterations", s.iterations}};
}

inline json to_json(const LiquidateEverywhereSolution& s) {
  return {{"negative_regime", s.negative},
          {"barrier", s.barrier},
          {"value", {to_json(s.value[0]), to_json(s.value[1])}}};
}

inline json to_json(const IterationReport& r) {
  return {{"outer_iterations", r.outer_iterations},
          {"gap", r.gap},
          {"contraction", r.contraction},
          {"x_cap", r.x_cap},
          {"h", r.h},
          {"lower_barriers", r.lower_barriers},
          {"upper_barriers", r.upper_barriers}};
}

inline json to_json(const SimEstimate& e) {
  return {{"mean", e.mean},     {"stderr", e.stderr_},   {"paths", e.paths},
          {"seed", e.seed},     {"dt", e.dt},            {"horizon", e.horizon},
          {"horizon_mass", e.horizon_mass}, {"mean_steps", e.mean_steps}};
}

inline json to_json(const SimConfig& c) {
  return {{"dt", c.dt},           {"dt_max", c.dt_max},         {"step_scale", c.step_scale},
          {"horizon", c.horizon}, {"paths", c.paths},           {"seed", c.seed},
          {"antithetic", c.antithetic}, {"threads", c.threads}, {"roulette_level", c.roulette_level}};
}

}  // namespace regdiv
