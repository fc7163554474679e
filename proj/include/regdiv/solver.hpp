#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "regdiv/error.hpp"
#include "regdiv/fixedpoint.hpp"
#include "regdiv/model.hpp"
#include "regdiv/two_regime.hpp"

namespace regdiv {

// Closed-form value functions sampled on the grid k h; each regime continues
// linearly beyond its own barrier.
inline GridFunction sample_piecewise(const std::array<PiecewiseFunction, 2>& v, const std::array<double, 2>& barriers,
                                     double h, std::size_t n) {
  return GridFunction::sample(
      2, h, n, [&](std::size_t i, double x) { return v[i].value(x); },
      [&](std::size_t i, double x) { return v[i].d1(x); }, {barriers[0], barriers[1]});
}

// Which solver produced a ModelSolution.
enum class Method { FixedPoint, NegativeClosedForm, BarrierPair, LiquidateEverywhere, PayAll };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::FixedPoint: return "fixed_point";
    case Method::NegativeClosedForm: return "liquidation_closed_form";
    case Method::BarrierPair: return "barrier_pair";
    case Method::LiquidateEverywhere: return "liquidate_everywhere";
    case Method::PayAll: return "pay_all";
  }
  return "unknown";
}

struct ModelSolution {
  DriftCase drift = DriftCase::AllPositive;
  Method method = Method::FixedPoint;
  BarrierPolicy policy;
  GridFunction value;
  std::optional<SolveResult> fixed;
  std::optional<PositiveCaseSolution> positive;  // closed form, also used as the barrier-pair fallback
  std::optional<NegativeCaseSolution> negative;
  std::optional<LiquidateEverywhereSolution> everywhere;
  std::vector<std::string> notes;
};

// Routes a model to the solver matching its drift signs.
//  - all drifts positive: two-sided fixed-point iteration (plus the closed
//    form as a cross-check for two regimes);
//  - mixed signs, two regimes: the liquidation-dividend system; when it has
//    no admissible root, the smooth-fit barrier pair is returned instead and
//    the reason is kept in `notes`;
//  - no positive drift: paying everything at once, V(x, i) = x.
inline ModelSolution solve_model(const RegimeModel& m, const SolveOptions& opt = {}) {
  ModelSolution s;
  s.drift = drift_sign_case(m);
  switch (s.drift) {
    case DriftCase::AllPositive: {
      s.fixed = solve(m, opt);
      s.method = Method::FixedPoint;
      s.policy.barriers = s.fixed->barriers;
      s.value = s.fixed->value;
      if (m.size() == 2) {
        try {
          s.positive = solve_positive(m);
        } catch (const Error& e) {
          s.notes.push_back(std::string("closed-form cross-check unavailable: ") + e.what());
        }
      }
      return s;
    }
    case DriftCase::MixedSign: {
      require_two_regimes(m);
      std::array<double, 2> bars{};
      const std::array<PiecewiseFunction, 2>* v = nullptr;
      try {
        s.negative = solve_negative(m);
        s.method = Method::NegativeClosedForm;
        bars = s.negative->barriers;
        s.policy.barriers = {bars[0], bars[1]};
        s.policy.liquidation = {0.0, 0.0};
        s.policy.liquidation[s.negative->negative] = s.negative->d;
        v = &s.negative->value;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::LiquidateEverywhere) {
          s.everywhere = liquidate_everywhere_candidate(m);
          s.method = Method::LiquidateEverywhere;
          bars[s.everywhere->negative] = 0.0;
          bars[1 - s.everywhere->negative] = s.everywhere->barrier;
          s.policy.barriers = {bars[0], bars[1]};
          v = &s.everywhere->value;
        } else if (e.code() == ErrorCode::OrderingUnresolved || e.code() == ErrorCode::NoConvergence ||
                   e.code() == ErrorCode::SingularLinearSystem) {
          s.notes.push_back(e.what());
          s.positive = solve_barrier_pair(m);
          s.method = Method::BarrierPair;
          bars = s.positive->barriers;
          s.policy.barriers = {bars[0], bars[1]};
          v = &s.positive->value;
        } else {
          throw;
        }
      }
      const double cap = std::max(1.0, 2.0 * std::max(bars[0], bars[1]));
      s.value = sample_piecewise(*v, bars, opt.h, grid_intervals(cap, opt.h));
      return s;
    }
    case DriftCase::AllNonPositive: {
      s.method = Method::PayAll;
      s.policy.barriers.assign(m.size(), 0.0);
      s.value = GridFunction::sample(
          m.size(), opt.h, grid_intervals(1.0, opt.h), [](std::size_t, double x) { return x; },
          [](std::size_t, double) { return 1.0; }, std::vector<double>(m.size(), 0.0));
      return s;
    }
  }
  throw Error(ErrorCode::Internal, "unhandled drift case");
}

}  // namespace regdiv
