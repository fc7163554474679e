#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "regdiv/analytics.hpp"
#include "regdiv/liquidation.hpp"
#include "regdiv/montecarlo.hpp"
#include "regdiv/rng.hpp"
#include "regdiv/two_regime.hpp"

using namespace regdiv;

namespace {

RegimeModel base_model() { return make_two_regime({0.06, 0.24, 0.04}, -2.0, {0.08, 0.30, 0.05}, -3.0); }
RegimeModel mixed_example() { return make_two_regime({-0.08, 0.40, 0.06}, -10.0, {0.14, 0.50, 0.08}, -0.001); }
RegimeModel mixed_admissible() {
  return make_two_regime({-0.178922, 0.193293, 0.0878947}, -1.59916, {0.0939521, 0.251009, 0.0511778}, -0.171029);
}

SimConfig config(std::size_t paths, std::uint64_t seed = 42) {
  SimConfig c;
  c.paths = paths;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(PathRng, StreamsAreReproducibleAndMirrored) {
  PathRng a(42, 7), b(42, 7), m(42, 7, true), other(42, 8);
  for (int k = 0; k < 100; ++k) {
    const double z = a.normal();
    EXPECT_EQ(z, b.normal());
    EXPECT_EQ(-z, m.normal());
    EXPECT_NE(z, other.normal());
  }
  for (int k = 0; k < 1000; ++k) {
    const double u = a.uniform();
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Simulate, ZeroStartIsImmediateRuin) {
  const auto e = simulate_barrier(base_model(), {{1.05, 1.07}, {}}, 0.0, 0, config(1000));
  EXPECT_EQ(e.mean, 0.0);
  EXPECT_EQ(e.stderr_, 0.0);
}

TEST(Simulate, ZeroBarrierPaysEverythingAtOnce) {
  for (double x0 : {0.3, 1.7}) {
    const auto e = simulate_barrier(base_model(), {{0.0, 0.0}, {}}, x0, 1, config(1000));
    EXPECT_EQ(e.mean, x0);
    EXPECT_EQ(e.stderr_, 0.0);
  }
}

TEST(Simulate, StartBelowLiquidationLevelPaysReserve) {
  const auto e = simulate_liquidation_dividend(mixed_example(), {{1.418, 1.415}, {0.086, 0.0}}, 0.05, 0, config(1000));
  EXPECT_EQ(e.mean, 0.05);
}

TEST(Simulate, ZeroLiquidationEqualsBarrier) {
  const auto m = base_model();
  const auto a = simulate_liquidation_dividend(m, {{1.05, 1.07}, {0.0, 0.0}}, 0.5, 0, config(20000));
  const auto b = simulate_barrier(m, {{1.05, 1.07}, {}}, 0.5, 0, config(20000));
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.stderr_, b.stderr_);
}

TEST(Simulate, RejectsInvalidBand) {
  try {
    simulate_liquidation_dividend(mixed_example(), {{1.418, 1.415}, {1.5, 0.0}}, 0.5, 0, config(10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidBand);
  }
  EXPECT_THROW(simulate_barrier(base_model(), {{1.0}, {}}, 0.5, 0, config(10)), Error);
}

TEST(Simulate, BitIdenticalAcrossRunsAndThreads) {
  const auto m = base_model();
  auto c = config(40000, 9);
  const auto a = simulate_barrier(m, {{1.05, 1.07}, {}}, 0.6, 1, c);
  const auto b = simulate_barrier(m, {{1.05, 1.07}, {}}, 0.6, 1, c);
  c.threads = 4;
  const auto t = simulate_barrier(m, {{1.05, 1.07}, {}}, 0.6, 1, c);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.mean, t.mean);
  EXPECT_EQ(a.stderr_, t.stderr_);
  EXPECT_EQ(a.mean_steps, t.mean_steps);
  const auto other = simulate_barrier(m, {{1.05, 1.07}, {}}, 0.6, 1, config(40000, 10));
  EXPECT_NE(a.mean, other.mean);
}

TEST(Simulate, SingleRegimeMatchesClosedForm) {
  const double mu = 0.06, sigma = 0.24, r = 0.04;
  const auto s = single_regime_solution(mu, sigma, r);
  const auto e = simulate_barrier(make_single_regime(mu, sigma, r), {{s.barrier}, {}}, 0.5, 0, config(200000));
  EXPECT_LE(std::abs(e.mean - s.value(0.5)), 3 * e.stderr_) << e.mean << " +- " << e.stderr_ << " vs " << s.value(0.5);
  EXPECT_LE(e.horizon_mass, 1e-6);
}

// With bridge-based ruin detection the step size carries no first-order
// bias; coarser and finer runs both sit on the closed form.
TEST(Simulate, StepRefinementStaysOnClosedForm) {
  const double mu = 0.06, sigma = 0.24, r = 0.04;
  const auto s = single_regime_solution(mu, sigma, r);
  for (double dt : {4e-4, 2e-4, 1e-4}) {
    auto c = config(100000, 77);
    c.dt = dt;
    const auto e = simulate_barrier(make_single_regime(mu, sigma, r), {{s.barrier}, {}}, 0.2, 0, c);
    EXPECT_LE(std::abs(e.mean - s.value(0.2)), 3 * e.stderr_) << "dt=" << dt;
  }
}

TEST(Simulate, MonotoneInInitialReserve) {
  const auto m = base_model();
  double prev = 0.0, prev_se = 0.0;
  for (double x : {0.1, 0.3, 0.6, 0.9, 1.2}) {
    const auto e = simulate_barrier(m, {{1.05, 1.07}, {}}, x, 0, config(20000, 5));
    EXPECT_GE(e.mean - prev, -3 * std::hypot(e.stderr_, prev_se)) << "x=" << x;
    prev = e.mean;
    prev_se = e.stderr_;
  }
}

TEST(Simulate, PublishedLiquidationPolicyMatchesItsOperatorValue) {
  const auto m = mixed_example();
  const BarrierPolicy p{{1.418, 1.415}, {0.086, 0.0}};
  const auto v = liquidation_strategy_value(m, p, 1e-11);
  const auto e = simulate_liquidation_dividend(m, p, 0.5, 0, config(100000));
  EXPECT_LE(std::abs(e.mean - v.value(0, 0.5)), 3 * e.stderr_) << e.mean << " +- " << e.stderr_;
}

TEST(Simulate, LiquidationClosedFormAtProbePoints) {
  const auto m = mixed_admissible();
  const auto s = solve_negative(m);
  const BarrierPolicy p{{s.barriers[0], s.barriers[1]}, {s.d, 0.0}};
  for (const auto& [x, i] : std::vector<std::pair<double, std::size_t>>{{0.01, 0}, {0.1, 0}, {0.5, 0}, {0.3, 1}, {0.8, 1}}) {
    const auto e = simulate_liquidation_dividend(m, p, x, i, config(100000));
    EXPECT_LE(std::abs(e.mean - s.evaluate(x, i)), 3 * e.stderr_ + 1e-12) << "x=" << x << " regime " << i;
  }
}

TEST(Simulate, DumpPathsFormat) {
  std::ostringstream out;
  dump_paths(base_model(), {{1.05, 1.07}, {}}, 1.0, 0, config(10), 3, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "path,t,regime,reserve,cum_dividend,discount");
  std::size_t rows = 0, last_path = 0;
  while (std::getline(in, line)) {
    ++rows;
    last_path = std::stoul(line.substr(0, line.find(',')));
  }
  EXPECT_GT(rows, 3u);
  EXPECT_EQ(last_path, 2u);
}

TEST(Dominance, ShiftedBarriersNeverBeatTheValue) {
  const auto m = base_model();
  const auto s = solve_positive(m);
  const BarrierPolicy best{{s.barriers[0], s.barriers[1]}, {}};
  const auto V = [&](std::size_t i, double x) { return s.evaluate(x, i); };
  const auto rep = dominance_probe(m, V, best, {0.0, -0.2, 0.2}, {{0.5, 0}, {1.0, 1}}, config(50000));
  ASSERT_EQ(rep.size(), 6u);
  for (const auto& e : rep) {
    EXPECT_TRUE(e.ok) << "shift " << e.shift << " x=" << e.point.x << ": " << e.estimate.mean << " vs " << e.value;
    if (e.shift == 0.0) EXPECT_LE(std::abs(e.estimate.mean - e.value), 3 * e.estimate.stderr_);
  }
}
