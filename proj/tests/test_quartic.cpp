#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "regdiv/quartic.hpp"

using namespace regdiv;

namespace {

RegimeModel random_model(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> mu(-0.5, 0.5), sig(0.1, 0.6), q(0.01, 10.0), r(0.01, 0.1);
  return make_two_regime({mu(gen), sig(gen), r(gen)}, -q(gen), {mu(gen), sig(gen), r(gen)}, -q(gen));
}

// Real eigenvalues of the companion matrix of the expanded quartic.
std::vector<double> companion_roots(const RegimeModel& m) {
  std::array<std::array<double, 3>, 2> f{};  // f[k] = {c0, c1, c2}
  for (int k = 0; k < 2; ++k) {
    const auto& s = m.states[k];
    f[k] = {m.generator[k][k] - s.discount, s.mu, 0.5 * s.sigma * s.sigma};
  }
  std::array<double, 5> p{};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) p[a + b] += f[0][a] * f[1][b];
  p[0] -= m.generator[0][0] * m.generator[1][1];
  Eigen::Matrix4d c = Eigen::Matrix4d::Zero();
  for (int k = 0; k < 3; ++k) c(k + 1, k) = 1.0;
  for (int k = 0; k < 4; ++k) c(k, 3) = -p[k] / p[4];
  const Eigen::EigenSolver<Eigen::Matrix4d> es(c);
  std::vector<double> out;
  for (int k = 0; k < 4; ++k) out.push_back(es.eigenvalues()[k].real());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(Quartic, TableModelMatchesCompanionMatrix) {
  const auto m = make_two_regime({0.06, 0.24, 0.04}, -2.0, {0.08, 0.30, 0.05}, -3.0);
  const auto r = quartic_roots(m);
  const auto e = companion_roots(m);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(r.lambda[k], e[k], 1e-9 * std::abs(e[k])) << "root " << k;
}

TEST(Quartic, SymmetricModelFactorizes) {
  const double mu = 0.07, sigma = 0.3, r = 0.05, q = 1.5;
  const auto m = make_two_regime({mu, sigma, r}, -q, {mu, sigma, r}, -q);
  const auto roots = quartic_roots(m);
  const auto a = characteristic_roots(mu, sigma, r + 2 * q);  // F = -q
  const auto b = characteristic_roots(mu, sigma, r);          // F = +q
  std::array<double, 4> expect{a.lambda_minus, b.lambda_minus, b.lambda_plus, a.lambda_plus};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(roots.lambda[k], expect[k], 1e-12 * std::abs(expect[k]));
}

TEST(Quartic, RandomModelsSignPatternInterlacingAndResidual) {
  std::mt19937_64 gen(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto m = random_model(gen);
    const auto r = quartic_roots(m);
    const auto& l = r.lambda;
    ASSERT_TRUE(l[0] < l[1] && l[1] < 0.0 && 0.0 < l[2] && l[2] < l[3]) << "trial " << trial;
    const auto th = effective_rates(m);
    for (std::size_t k = 0; k < 2; ++k) {
      const auto single = characteristic_roots(m.states[k].mu, m.states[k].sigma, th[k]);
      EXPECT_LT(l[0], single.lambda_minus) << "trial " << trial;
      EXPECT_LT(single.lambda_minus, l[1]) << "trial " << trial;
      EXPECT_LT(l[2], single.lambda_plus) << "trial " << trial;
      EXPECT_LT(single.lambda_plus, l[3]) << "trial " << trial;
    }
    const double qq = m.generator[0][0] * m.generator[1][1];
    for (double x : l) EXPECT_NEAR(regime_poly(m, 0, x) * regime_poly(m, 1, x), qq, 1e-8 * qq) << "trial " << trial;
    const auto e = companion_roots(m);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(l[k], e[k], 1e-7 * std::max(1.0, std::abs(e[k]))) << "trial " << trial;
  }
}

TEST(Quartic, RejectsWrongRegimeCount) {
  try {
    quartic_roots(make_single_regime(0.06, 0.24, 0.04));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}
