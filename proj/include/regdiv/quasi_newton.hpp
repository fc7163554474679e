#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "regdiv/error.hpp"
#include "regdiv/linalg.hpp"

namespace regdiv {

struct NewtonOptions {
  std::size_t max_iterations = 200;
  double tol = 1e-10;  // on the residual infinity norm
  double fd_step = 1e-6;
  int max_halvings = 40;
};

template <std::size_t N>
struct NewtonResult {
  Vec<N> x{};
  Vec<N> residual{};
  double residual_norm = INFINITY;
  std::size_t iterations = 0;
  bool converged = false;
};

// Damped Newton iteration with a forward-difference Jacobian and step
// halving on the residual 2-norm. The residual callable may throw
// regdiv::Error; such points count as infinitely bad.
template <std::size_t N, class F>
NewtonResult<N> quasi_newton(F&& f, Vec<N> x0, const NewtonOptions& opt = {}) {
  auto eval = [&](const Vec<N>& x, Vec<N>& r) {
    try {
      r = f(x);
    } catch (const Error&) {
      r.fill(INFINITY);
    }
    return norm2(r);
  };
  NewtonResult<N> out;
  out.x = x0;
  double n2 = eval(out.x, out.residual);
  for (; out.iterations < opt.max_iterations; ++out.iterations) {
    out.residual_norm = norm_inf(out.residual);
    if (out.residual_norm <= opt.tol) {
      out.converged = true;
      return out;
    }
    if (!std::isfinite(n2)) return out;
    Mat<N> jac{};
    for (std::size_t c = 0; c < N; ++c) {
      Vec<N> xp = out.x, rp;
      const double step = opt.fd_step * std::max(1.0, std::abs(out.x[c]));
      xp[c] += step;
      if (!std::isfinite(eval(xp, rp))) return out;
      for (std::size_t r = 0; r < N; ++r) jac[r][c] = (rp[r] - out.residual[r]) / step;
    }
    Vec<N> rhs;
    for (std::size_t r = 0; r < N; ++r) rhs[r] = -out.residual[r];
    Vec<N> dx;
    try {
      dx = solve_linear<N>(jac, rhs);
    } catch (const Error&) {
      return out;
    }
    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k <= opt.max_halvings; ++k, t *= 0.5) {
      Vec<N> xt, rt;
      for (std::size_t c = 0; c < N; ++c) xt[c] = out.x[c] + t * dx[c];
      const double nt = eval(xt, rt);
      if (nt < n2) {
        out.x = xt;
        out.residual = rt;
        n2 = nt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  out.residual_norm = norm_inf(out.residual);
  out.converged = out.residual_norm <= opt.tol;
  return out;
}

}  // namespace regdiv
