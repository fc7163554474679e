#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "regdiv/analytics.hpp"
#include "regdiv/exp_convolution.hpp"

namespace regdiv {

// Solution of (1/2) s^2 w'' + mu w' - theta w + G = 0 on a band [0, a] with
// w(0) = d, w'(a) = 1, written through the scale function W = W^(theta):
//
//   w(u) = d Z(u) + alpha W(u) - int_0^u W(u - y) G(y) dy,   Z = 1 + theta int W.
//
// Evaluated naively the e^{l+ u} parts of the last two terms cancel
// catastrophically once l+ a is large. With
//   M(u)  = int_0^u e^{l-(u-y)} G,   Ph(u) = int_0^u e^{-l+ y} G,
//   L(u)  = int_u^a e^{l+(u-y)} G    (a decaying kernel, built backwards),
// the solution is
//   w(u) = d (1 - theta c/l+ - theta c (e^{l- u} - 1)/l-)
//          + c [ e^{l+(u-a)} E + L(u) - alpha e^{l- u} + M(u) ]
// where c = 2/(s^2 (l+ - l-)) and E = e^{l+ a}(alpha + d theta/l+) - int_0^a e^{l+(a-y)} G
// has a closed form free of growing exponentials. For d = 0, alpha is the
// barrier functional A(a).
struct BandKernel {
  ScaleFunction w;
  double theta = 0.0;
  double h = 0.0;
  ExpCellWeights m_h, pn_h;  // kernels e^{l- t} and e^{-l+ t} over one grid step

  BandKernel() = default;
  BandKernel(double mu, double sigma, double theta_, double h_)
      : w(mu, sigma, theta_), theta(theta_), h(h_), m_h(exp_cell_weights(w.lm, h_)), pn_h(exp_cell_weights(-w.lp, h_)) {}

  ExpCellWeights m(double t) const { return std::abs(t - h) <= 1e-12 * h ? m_h : exp_cell_weights(w.lm, t); }
  ExpCellWeights pn(double t) const { return std::abs(t - h) <= 1e-12 * h ? pn_h : exp_cell_weights(-w.lp, t); }

  struct Ends {
    double E = 0.0;
    double alpha = 0.0;
  };

  // E and alpha from M(a) and Ph(a).
  Ends ends(double d, double a, double Ma, double Pa) const {
    const double c = w.k, lp = w.lp, lm = w.lm;
    const double ema = std::exp(lm * a);
    const double den = c * (lp - lm * std::exp((lm - lp) * a));
    Ends e;
    e.E = (1.0 + d * theta * c * ema * (1.0 - lm / lp) - c * lm * Ma + c * lm * ema * Pa) / den;
    e.alpha = e.E * std::exp(-lp * a) + Pa - d * theta / lp;
    return e;
  }
};

struct BandSolution {
  std::vector<double> value, slope;  // at the nodes
  double alpha = 0.0;
  double E = 0.0;
  double second_at_top = 0.0;  // w''(a)
};

// Nodes 0 = u_0 < ... < u_m = a, G sampled at the nodes. Between nodes G is
// the chord plus the curvature bump of `K` (one entry per cell; empty means
// piecewise linear).
inline BandSolution solve_band(const BandKernel& k, double d, const std::vector<double>& u,
                               const std::vector<double>& G, const std::vector<double>& K = {}) {
  const std::size_t m = u.size() - 1;
  auto kap = [&](std::size_t j) { return K.empty() ? 0.0 : K[j]; };
  const double c = k.w.k, lp = k.w.lp, lm = k.w.lm, th = k.theta;
  std::vector<double> M(m + 1, 0.0), em(m + 1, 1.0), L(m + 1, 0.0), r(m + 1, 1.0);
  double P = 0.0, epn = 1.0;  // Ph(u_j) and e^{-l+ u_j}
  for (std::size_t j = 0; j < m; ++j) {
    const double t = u[j + 1] - u[j];
    const auto wm = k.m(t), wp = k.pn(t);
    M[j + 1] = exp_advance(wm, M[j], G[j], G[j + 1], kap(j));
    em[j + 1] = em[j] * wm.decay;
    P += epn * exp_advance(wp, 0.0, G[j + 1], G[j], kap(j));
    epn *= wp.decay;
  }
  for (std::size_t j = m; j-- > 0;) {
    const auto wp = k.pn(u[j + 1] - u[j]);
    L[j] = exp_advance(wp, L[j + 1], G[j + 1], G[j], kap(j));
    r[j] = r[j + 1] * wp.decay;
  }
  const auto e = k.ends(d, u[m], M[m], P);
  BandSolution s;
  s.alpha = e.alpha;
  s.E = e.E;
  s.value.resize(m + 1);
  s.slope.resize(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    s.value[j] = d * (1.0 - th * c / lp - th * c * (em[j] - 1.0) / lm) +
                 c * (r[j] * e.E + L[j] - e.alpha * em[j] + M[j]);
    s.slope[j] = -d * th * c * em[j] + c * (lp * r[j] * e.E + lp * L[j] - e.alpha * lm * em[j] + lm * M[j]);
  }
  s.second_at_top = -d * th * c * lm * em[m] + c * (lp * lp * e.E - e.alpha * lm * lm * em[m] + lm * lm * M[m]) +
                    c * G[m] * (lm - lp);
  return s;
}

}  // namespace regdiv
