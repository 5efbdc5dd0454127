#pragma once

#include "swoc/problem.hpp"

namespace swoc {

namespace detail {
inline double fd_step1(double v) { return 1e-6 * (1.0 + std::abs(v)); }
// Larger step for second derivatives to balance truncation and roundoff.
inline double fd_step2(double v) { return 1e-4 * (1.0 + std::abs(v)); }
}  // namespace detail

/// Central-difference Jacobian of f(x, u) with respect to x.
inline Mat fd_jacobian_state(const DynamicsFn& f, const Vec& x, const Vec& u) {
  const Vec f0 = f(x, u);
  Mat J(f0.size(), x.size());
  Vec xp = x, xm = x;
  for (int i = 0; i < x.size(); ++i) {
    const double h = detail::fd_step1(x(i));
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    J.col(i) = (f(xp, u) - f(xm, u)) / (2.0 * h);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return J;
}

inline Mat fd_jacobian_input(const DynamicsFn& f, const Vec& x, const Vec& u) {
  const Vec f0 = f(x, u);
  Mat J(f0.size(), u.size());
  Vec up = u, um = u;
  for (int i = 0; i < u.size(); ++i) {
    const double h = detail::fd_step1(u(i));
    up(i) = u(i) + h;
    um(i) = u(i) - h;
    J.col(i) = (f(x, up) - f(x, um)) / (2.0 * h);
    up(i) = u(i);
    um(i) = u(i);
  }
  return J;
}

inline Vec fd_gradient(const std::function<double(const Vec&)>& f,
                       const Vec& x) {
  Vec g(x.size());
  Vec xp = x, xm = x;
  for (int i = 0; i < x.size(); ++i) {
    const double h = detail::fd_step1(x(i));
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return g;
}

inline Mat fd_hessian(const std::function<double(const Vec&)>& f,
                      const Vec& x) {
  const int n = static_cast<int>(x.size());
  Mat H(n, n);
  const double f0 = f(x);
  Vec xs = x;
  for (int i = 0; i < n; ++i) {
    const double hi = detail::fd_step2(x(i));
    for (int j = i; j < n; ++j) {
      const double hj = detail::fd_step2(x(j));
      if (i == j) {
        xs(i) = x(i) + hi;
        const double fp = f(xs);
        xs(i) = x(i) - hi;
        const double fm = f(xs);
        xs(i) = x(i);
        H(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
      } else {
        xs(i) = x(i) + hi;
        xs(j) = x(j) + hj;
        const double fpp = f(xs);
        xs(j) = x(j) - hj;
        const double fpm = f(xs);
        xs(i) = x(i) - hi;
        const double fmm = f(xs);
        xs(j) = x(j) + hj;
        const double fmp = f(xs);
        xs(i) = x(i);
        xs(j) = x(j);
        H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
      }
    }
  }
  return H;
}

/// Jacobian of the subsystem dynamics with respect to the state, analytic
/// when supplied, otherwise central finite differences.
inline Mat eval_A(const SubsystemModel& m, const Vec& x, const Vec& u) {
  if (m.jacobian_state) return m.jacobian_state(x, u);
  return fd_jacobian_state(m.dynamics, x, u);
}

inline Mat eval_B(const SubsystemModel& m, const Vec& x, const Vec& u) {
  if (m.jacobian_input) return m.jacobian_input(x, u);
  return fd_jacobian_input(m.dynamics, x, u);
}

inline CostQuadratics eval_quadratics(const SubsystemModel& m, const Vec& x,
                                      const Vec& u) {
  if (m.running_cost_quadratics) return m.running_cost_quadratics(x, u);
  const int n = static_cast<int>(x.size());
  const int nu = static_cast<int>(u.size());
  CostQuadratics c;
  c.q = m.running_cost(x, u);
  c.qx = fd_gradient([&](const Vec& xx) { return m.running_cost(xx, u); }, x);
  c.ru = fd_gradient([&](const Vec& uu) { return m.running_cost(x, uu); }, u);
  Vec xu(n + nu);
  xu << x, u;
  const Mat H = fd_hessian(
      [&](const Vec& w) {
        return m.running_cost(w.head(n), w.tail(nu));
      },
      xu);
  c.Q = H.topLeftCorner(n, n);
  c.P = H.topRightCorner(n, nu);
  c.R = H.bottomRightCorner(nu, nu);
  return c;
}

inline Vec eval_terminal_gradient(const TerminalCost& phi, const Vec& x) {
  if (phi.gradient) return phi.gradient(x);
  return fd_gradient(phi.value, x);
}

inline Mat eval_terminal_hessian(const TerminalCost& phi, const Vec& x) {
  if (phi.hessian) return phi.hessian(x);
  return fd_hessian(phi.value, x);
}

}  // namespace swoc
