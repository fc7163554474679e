#include <gtest/gtest.h>

#include "regdiv/io.hpp"
#include "regdiv/model.hpp"

using namespace regdiv;

namespace {

RegimeModel base_model() { return make_two_regime({0.06, 0.24, 0.04}, -2.0, {0.08, 0.30, 0.05}, -3.0); }

ErrorCode code_of(const RegimeModel& raw) {
  try {
    validate(raw);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST(Model, SingleStateWithZeroGeneratorIsValid) {
  const auto m = make_single_regime(0.06, 0.24, 0.04);
  EXPECT_EQ(m.size(), 1u);
  EXPECT_EQ(m.generator[0][0], 0.0);
}

TEST(Model, TwoStateTableModelIsValid) {
  const auto m = base_model();
  EXPECT_EQ(m.size(), 2u);
  EXPECT_EQ(m.q(0, 1), 2.0);
  EXPECT_EQ(m.q(1, 0), 3.0);
}

TEST(Model, RejectsEachInvariant) {
  RegimeModel raw{{{0.06, 0.0, 0.04}}, {{0.0}}};
  EXPECT_EQ(code_of(raw), ErrorCode::NonPositiveVolatility);
  raw = {{{0.06, 0.24, 0.0}}, {{0.0}}};
  EXPECT_EQ(code_of(raw), ErrorCode::NonPositiveDiscount);
  raw = {{{0.06, 0.24, 0.04}, {0.08, 0.3, 0.05}}, {{-2.0, 2.5}, {3.0, -3.0}}};
  EXPECT_EQ(code_of(raw), ErrorCode::BadGeneratorRowSum);
  raw = {{{0.06, 0.24, 0.04}, {0.08, 0.3, 0.05}}, {{1.0, -1.0}, {3.0, -3.0}}};
  EXPECT_EQ(code_of(raw), ErrorCode::NegativeOffDiagonal);
  raw = {{{0.06, 0.24, 0.04}, {0.08, 0.3, 0.05}}, {{0.0}}};
  EXPECT_EQ(code_of(raw), ErrorCode::DimensionMismatch);
  raw = {{}, {}};
  EXPECT_EQ(code_of(raw), ErrorCode::DimensionMismatch);
}

TEST(Model, RenormalizesDiagonalWithinTolerance) {
  RegimeModel raw{{{0.06, 0.24, 0.04}, {0.08, 0.3, 0.05}}, {{-2.0 + 5e-13, 2.0}, {3.0, -3.0}}};
  const auto m = validate(raw);
  EXPECT_EQ(m.generator[0][0], -2.0);
}

TEST(Model, EffectiveRates) {
  const auto th = effective_rates(base_model());
  EXPECT_DOUBLE_EQ(th[0], 2.04);
  EXPECT_DOUBLE_EQ(th[1], 3.05);
  EXPECT_DOUBLE_EQ(effective_rates(make_single_regime(0.06, 0.24, 0.04))[0], 0.04);
}

TEST(Model, EffectiveRatesArePositiveAndDominateDiscount) {
  const auto m = validate({{{0.1, 0.2, 0.01}, {-0.1, 0.3, 0.02}, {0.2, 0.1, 0.03}},
                           {{-1.0, 0.5, 0.5}, {0.0, 0.0, 0.0}, {2.0, 1.0, -3.0}}});
  const auto th = effective_rates(m);
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_GT(th[i], 0.0);
    EXPECT_GE(th[i], m.states[i].discount);
  }
}

TEST(Model, DriftSignCase) {
  EXPECT_EQ(drift_sign_case(base_model()), DriftCase::AllPositive);
  EXPECT_EQ(drift_sign_case(make_two_regime({-0.08, 0.4, 0.06}, -10, {0.14, 0.5, 0.08}, -0.001)),
            DriftCase::MixedSign);
  EXPECT_EQ(drift_sign_case(make_two_regime({-1, 0.4, 0.06}, -1, {-1, 0.5, 0.08}, -1)), DriftCase::AllNonPositive);
}

TEST(Model, DriftSignCaseIsLabelInvariant) {
  const auto a = make_two_regime({-0.08, 0.4, 0.06}, -10, {0.14, 0.5, 0.08}, -0.001);
  const auto b = make_two_regime({0.14, 0.5, 0.08}, -0.001, {-0.08, 0.4, 0.06}, -10);
  EXPECT_EQ(drift_sign_case(a), drift_sign_case(b));
}

TEST(Model, ContractionConstant) {
  EXPECT_NEAR(contraction_constant(base_model()), std::max(2 / 2.04, 3 / 3.05), 1e-15);
  EXPECT_EQ(contraction_constant(make_single_regime(0.06, 0.24, 0.04)), 0.0);
}

TEST(Model, SerializeRoundTripIsIdempotent) {
  const auto m = validate({{{0.1, 0.2, 0.01}, {-0.1, 0.3, 0.02}, {0.2, 0.1, 0.03}},
                           {{-1.0, 0.5, 0.5}, {0.0, 0.0, 0.0}, {2.0, 1.0, -3.0}}});
  const std::string once = serialize(m);
  const auto back = parse_model(once);
  EXPECT_EQ(serialize(back), once);
  EXPECT_EQ(back.states.size(), 3u);
  EXPECT_EQ(back.generator, m.generator);
}
