#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <thread>
#include <vector>

#include "regdiv/error.hpp"
#include "regdiv/fixedpoint.hpp"
#include "regdiv/model.hpp"
#include "regdiv/rng.hpp"

namespace regdiv {

struct SimConfig {
  double dt = 1e-4;      // smallest step, used next to the ruin / liquidation level
  double dt_max = 0.1;   // largest step, used far from it
  double step_scale = 5.0;  // steps keep the lower level step_scale * sigma * sqrt(step) away
  double horizon = 0.0;  // <= 0 means max(100 max_i 1/theta_i, 30 / min_i r_i)
  std::size_t paths = 100000;
  std::uint64_t seed = 42;
  bool antithetic = true;
  unsigned threads = 1;
  // Discounting: dividends carry weight e^{-Lambda} while Lambda < roulette
  // level; beyond it the path is killed at an independent Exp(1) amount of
  // further discounting and pays with weight e^{-level}. Level 0 is pure
  // killing, which makes the time discretization free of discount bias.
  double roulette_level = 0.0;
};

struct SimEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  double dt = 0.0;
  double horizon = 0.0;
  double horizon_mass = 0.0;  // average discount weight of paths still alive at the horizon
  double mean_steps = 0.0;
};

struct PathRecord {
  double t, reserve, cum_dividend, discount;
  std::size_t regime;
};

namespace detail {

struct PathResult {
  double value = 0.0;
  double alive_mass = 0.0;
  std::size_t steps = 0;
};

inline double resolved_horizon(const RegimeModel& m, const SimConfig& c) {
  if (c.horizon > 0.0) return c.horizon;
  // Dividends are discounted at r_i, so e^{-30} of the discount mass at most
  // is left past the default horizon.
  double worst = 0.0, slowest = INFINITY;
  for (double th : effective_rates(m)) worst = std::max(worst, 1.0 / th);
  for (const auto& s : m.states) slowest = std::min(slowest, s.discount);
  return std::max(100.0 * worst, 30.0 / slowest);
}

// One path of the liquidation-dividend strategy (d = 0 gives the plain
// barrier strategy). Within a regime the free motion over a step is exact;
// the overflow above b is the Brownian-bridge maximum excess and the lower
// level is crossed with the bridge probability exp(-2 a_0 a_1 / (s^2 dt)).
inline PathResult simulate_path(const RegimeModel& m, const BarrierPolicy& p, double x0, std::size_t i0,
                                const SimConfig& c, double horizon, PathRng& rng,
                                const std::function<void(const PathRecord&)>& record = {}) {
  PathResult r;
  const double L = c.roulette_level;
  double u = x0, t = 0.0, lam = 0.0, paid = 0.0;
  std::size_t i = i0;
  const double kill = L + rng.exponential();
  auto weight = [&](double l) { return std::exp(-std::min(l, L)); };
  auto next_switch = [&](std::size_t k) {
    const double out = -m.generator[k][k];
    return out > 0.0 ? t + rng.exponential() / out : INFINITY;
  };
  auto trace = [&] {
    if (record) record({t, u, paid, std::exp(-lam), i});
  };
  // Lump payments on entering regime k; returns false once the path ends.
  auto enter = [&](std::size_t k) {
    if (u <= 0.0) return false;
    if (u <= p.d(k)) {
      paid += weight(lam) * u;
      u = 0.0;
      return false;
    }
    if (u > p.barriers[k]) {
      paid += weight(lam) * (u - p.barriers[k]);
      u = p.barriers[k];
    }
    return u > 0.0;
  };
  trace();
  bool alive = enter(i);
  double ts = next_switch(i);
  while (alive) {
    if (t >= horizon) {
      r.alive_mass = weight(lam);
      break;
    }
    const auto& s = m.states[i];
    const double lo = p.d(i), b = p.barriers[i];
    const double dist = u - lo;
    double dt = dist / (c.step_scale * s.sigma);
    dt = std::clamp(dt * dt, c.dt, c.dt_max);
    dt = std::min({dt, ts - t, horizon - t});
    const double to_kill = (kill - lam) / s.discount;
    const double to_level = lam < L ? (L - lam) / s.discount : INFINITY;
    bool killed = false;
    if (to_kill <= dt) {
      dt = to_kill;
      killed = true;
    }
    if (to_level < dt) {
      dt = to_level;
      killed = false;
    }
    const double var = s.sigma * s.sigma * dt;
    double u1 = u + s.mu * dt + std::sqrt(var) * rng.normal();
    const double w = L > 0.0 ? weight(lam + 0.5 * s.discount * dt) : 1.0;
    // Bridge events with probability below e^{-40} are skipped outright.
    if (u1 >= b || 2.0 * (b - u) * (b - u1) < 40.0 * var) {
      const double top = 0.5 * (u + u1 + std::sqrt((u1 - u) * (u1 - u) - 2.0 * var * std::log(rng.uniform())));
      if (top > b) {
        paid += w * (top - b);
        u1 -= top - b;
      }
    }
    const double gap = 2.0 * (u - lo) * (u1 - lo);
    const bool crossed = u1 <= lo || (gap < 40.0 * var && rng.uniform() < std::exp(-gap / var));
    ++r.steps;
    t += dt;
    lam += s.discount * dt;
    if (crossed) {
      paid += w * lo;
      u = 0.0;
      trace();
      break;
    }
    u = u1;
    trace();
    if (killed) break;
    if (t >= ts) {
      const double out = -m.generator[i][i];
      double pick = rng.uniform() * out;
      std::size_t j = i;
      for (std::size_t k = 0; k < m.size(); ++k) {
        if (k == i || m.generator[i][k] <= 0.0) continue;
        j = k;
        pick -= m.generator[i][k];
        if (pick <= 0.0) break;
      }
      i = j;
      alive = enter(i);
      ts = next_switch(i);
      trace();
    }
  }
  r.value = paid;
  return r;
}

inline void check_policy(const RegimeModel& m, const BarrierPolicy& p) {
  if (p.barriers.size() != m.size()) throw Error(ErrorCode::DimensionMismatch, "one barrier per regime");
  if (!p.liquidation.empty() && p.liquidation.size() != m.size())
    throw Error(ErrorCode::DimensionMismatch, "one liquidation level per regime");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(p.barriers[i] >= 0.0) || !std::isfinite(p.barriers[i]))
      throw Error(ErrorCode::InvalidBand, "barriers must be finite and nonnegative");
    if (p.d(i) < 0.0 || (p.d(i) > 0.0 && p.d(i) >= p.barriers[i]))
      throw Error(ErrorCode::InvalidBand, "need d_i < b_i in regime " + std::to_string(i));
  }
}

}  // namespace detail

// Discounted dividends until ruin under the (liquidation-)barrier policy,
// started at reserve x0 in regime i0.
inline SimEstimate simulate_liquidation_dividend(const RegimeModel& m, const BarrierPolicy& p, double x0,
                                                 std::size_t i0, const SimConfig& c) {
  detail::check_policy(m, p);
  if (i0 >= m.size()) throw Error(ErrorCode::OutOfRange, "start regime out of range");
  if (!(c.dt > 0.0) || c.dt_max < c.dt || c.paths == 0)
    throw Error(ErrorCode::OutOfRange, "need dt > 0, dt_max >= dt and at least one path");
  const double horizon = detail::resolved_horizon(m, c);
  // Antithetic twins are averaged first; the pair means are the samples.
  const std::size_t per = c.antithetic ? 2 : 1;
  const std::size_t groups = (c.paths + per - 1) / per;
  std::vector<double> sample(groups), mass(groups);
  std::vector<std::size_t> steps(groups);
  auto run = [&](std::size_t from, std::size_t to) {
    for (std::size_t g = from; g < to; ++g) {
      double v = 0.0, a = 0.0;
      std::size_t n = 0;
      for (std::size_t k = 0; k < per; ++k) {
        PathRng rng(c.seed, g, k == 1);
        const auto r = detail::simulate_path(m, p, x0, i0, c, horizon, rng);
        v += r.value;
        a += r.alive_mass;
        n += r.steps;
      }
      sample[g] = v / per;
      mass[g] = a / per;
      steps[g] = n;
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(c.threads, static_cast<unsigned>(groups)));
  if (threads == 1) {
    run(0, groups);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (groups + threads - 1) / threads;
    for (unsigned k = 0; k < threads; ++k) {
      const std::size_t from = k * chunk, to = std::min(groups, from + chunk);
      if (from < to) pool.emplace_back(run, from, to);
    }
    for (auto& th : pool) th.join();
  }
  // Fixed-order reduction, independent of the thread count. Sums are taken
  // relative to the first sample, so a constant sample is reproduced exactly.
  const double shift = sample[0];
  double sum = 0.0, sq = 0.0, am = 0.0, st = 0.0;
  for (std::size_t g = 0; g < groups; ++g) {
    sum += sample[g] - shift;
    am += mass[g];
    st += static_cast<double>(steps[g]);
  }
  const double offset = sum / groups, mean = shift + offset;
  for (std::size_t g = 0; g < groups; ++g) sq += (sample[g] - shift - offset) * (sample[g] - shift - offset);
  SimEstimate e;
  e.mean = mean;
  e.stderr_ = groups > 1 ? std::sqrt(sq / (groups - 1) / groups) : 0.0;
  e.paths = groups * per;
  e.seed = c.seed;
  e.dt = c.dt;
  e.horizon = horizon;
  e.horizon_mass = am / groups;
  e.mean_steps = st / (groups * per);
  return e;
}

inline SimEstimate simulate_barrier(const RegimeModel& m, const BarrierPolicy& b, double x0, std::size_t i0,
                                    const SimConfig& c) {
  BarrierPolicy plain{b.barriers, {}};
  return simulate_liquidation_dividend(m, plain, x0, i0, c);
}

// CSV `path,t,regime,reserve,cum_dividend,discount` for the first `count`
// paths of the run configured by `c` (the non-mirrored stream of each group).
inline void dump_paths(const RegimeModel& m, const BarrierPolicy& p, double x0, std::size_t i0, const SimConfig& c,
                       std::size_t count, std::ostream& out) {
  detail::check_policy(m, p);
  const double horizon = detail::resolved_horizon(m, c);
  out << "path,t,regime,reserve,cum_dividend,discount\n";
  for (std::size_t g = 0; g < count; ++g) {
    PathRng rng(c.seed, g, false);
    detail::simulate_path(m, p, x0, i0, c, horizon, rng, [&](const PathRecord& r) {
      out << g << ',' << r.t << ',' << r.regime << ',' << r.reserve << ',' << r.cum_dividend << ',' << r.discount
          << '\n';
    });
  }
}

struct ProbePoint {
  double x = 0.0;
  std::size_t regime = 0;
};

struct DominanceEntry {
  BarrierPolicy policy;
  double shift = 0.0;
  ProbePoint point;
  double value = 0.0;  // V(x, i)
  SimEstimate estimate;
  bool ok = false;  // estimate <= V + 3 stderr
};

// Simulates shifted barrier policies b* + delta and checks that none of them
// beats V by more than three standard errors.
inline std::vector<DominanceEntry> dominance_probe(const RegimeModel& m, const std::function<double(std::size_t, double)>& V,
                                                   const BarrierPolicy& best, const std::vector<double>& shifts,
                                                   const std::vector<ProbePoint>& points, const SimConfig& c) {
  std::vector<DominanceEntry> out;
  for (double s : shifts) {
    BarrierPolicy p = best;
    for (auto& b : p.barriers) b = std::max(0.0, b + s);
    for (std::size_t i = 0; i < p.liquidation.size(); ++i)
      if (p.liquidation[i] >= p.barriers[i]) p.liquidation[i] = 0.0;
    for (const auto& pt : points) {
      DominanceEntry e;
      e.policy = p;
      e.shift = s;
      e.point = pt;
      e.value = V(pt.regime, pt.x);
      e.estimate = simulate_liquidation_dividend(m, p, pt.x, pt.regime, c);
      e.ok = e.estimate.mean <= e.value + 3.0 * e.estimate.stderr_;
      out.push_back(e);
    }
  }
  return out;
}

}  // namespace regdiv
