#pragma once

// BFGS minimizer with a strong-Wolfe line search (bracketing + zoom with
// cubic interpolation). Objective values that are not finite are treated as
// +inf so the search backs away from them instead of failing.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace fcmm {

struct BfgsOptions {
  int max_iter = 500;
  double grad_tol = 1e-6;    // on the sup-norm of the objective's gradient
  double step_tol = 1e-8;    // relative step size
  double max_step = 10.0;    // sup-norm cap of a single step
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_evals = 40;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd g;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool nan_encountered = false;
  std::string message;
};

namespace detail {

inline double sup_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), kept
// safely inside the interval; falls back to bisection.
inline double cubic_step(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double mid = 0.5 * (a + b);
  if (!(disc >= 0.0) || !std::isfinite(fa) || !std::isfinite(fb)) return mid;
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) return mid;
  return t;
}

}  // namespace detail

/// Minimizes f starting at x0. `fg(x, g)` returns f(x) and writes the
/// gradient into g; it may return a non-finite value for invalid x.
template <class FG>
BfgsResult bfgs_minimize(FG&& fg, const Eigen::VectorXd& x0, const BfgsOptions& opt = {}) {
  using detail::sup_norm;
  const Eigen::Index n = x0.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  BfgsResult res;

  auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(n);
    double f = fg(x, g);
    ++res.evaluations;
    if (std::isnan(f) || !g.allFinite()) {
      if (std::isnan(f) || std::isfinite(f)) res.nan_encountered = true;
      f = inf;
    }
    return f;
  };

  Eigen::VectorXd x = x0, g;
  double f = eval(x, g);
  res.x = x;
  res.f = f;
  res.g = g;
  if (!std::isfinite(f)) {
    res.message = "objective is not finite at the starting point";
    return res;
  }

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  bool fresh = true;  // h is the identity
  Eigen::VectorXd xn, gn;

  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it + 1;
    Eigen::VectorXd p = -h * g;
    double d0 = g.dot(p);
    if (!(d0 < 0.0)) {
      h.setIdentity();
      fresh = true;
      scaled = false;
      p = -g;
      d0 = g.dot(p);
    }
    if (d0 == 0.0) {
      res.converged = true;
      res.message = "zero gradient";
      break;
    }
    double alpha = 1.0;
    const double pn = sup_norm(p);
    if (fresh) alpha = std::min(1.0, 1.0 / pn);
    if (alpha * pn > opt.max_step) alpha = opt.max_step / pn;

    // strong-Wolfe line search on phi(a) = f(x + a p)
    auto phi = [&](double a, double& da) {
      xn = x + a * p;
      const double fa = eval(xn, gn);
      da = std::isfinite(fa) ? gn.dot(p) : inf;
      return fa;
    };
    double a_prev = 0.0, f_prev = f, d_prev = d0;
    double a_ok = 0.0, f_ok = f;
    Eigen::VectorXd x_ok, g_ok;
    int evals = 0;
    auto remember = [&](double a, double fa) {
      if (fa < f_ok) {
        a_ok = a;
        f_ok = fa;
        x_ok = xn;
        g_ok = gn;
      }
    };
    auto zoom = [&](double lo, double f_lo, double d_lo, double hi, double f_hi, double d_hi) {
      while (evals < opt.max_line_evals) {
        const double a = std::isfinite(f_hi) && std::isfinite(d_hi)
                             ? detail::cubic_step(lo, f_lo, d_lo, hi, f_hi, d_hi)
                             : 0.5 * (lo + hi);
        double da;
        const double fa = phi(a, da);
        ++evals;
        if (!(fa <= f + opt.c1 * a * d0) || fa >= f_lo) {
          hi = a;
          f_hi = fa;
          d_hi = da;
        } else {
          remember(a, fa);
          if (std::abs(da) <= -opt.c2 * d0) return true;
          if (da * (hi - lo) >= 0.0) {
            hi = lo;
            f_hi = f_lo;
            d_hi = d_lo;
          }
          lo = a;
          f_lo = fa;
          d_lo = da;
        }
        if (std::abs(hi - lo) <= 1e-16 * std::max(1.0, std::abs(lo))) break;
      }
      return false;
    };

    while (evals < opt.max_line_evals) {
      double da;
      const double fa = phi(alpha, da);
      ++evals;
      if (!(fa <= f + opt.c1 * alpha * d0) || (evals > 1 && fa >= f_prev)) {
        zoom(a_prev, f_prev, d_prev, alpha, fa, da);
        break;
      }
      remember(alpha, fa);
      if (std::abs(da) <= -opt.c2 * d0) {
        break;
      }
      if (da >= 0.0) {
        zoom(alpha, fa, da, a_prev, f_prev, d_prev);
        break;
      }
      a_prev = alpha;
      f_prev = fa;
      d_prev = da;
      const double next = 2.0 * alpha;
      if (next * pn > opt.max_step) {
        // step cap reached with the function still decreasing
        break;
      }
      alpha = next;
    }

    if (a_ok == 0.0) {
      // no decrease along p
      if (sup_norm(g) < opt.grad_tol) {
        res.converged = true;
        res.message = "gradient below tolerance; no further decrease possible";
        break;
      }
      if (!fresh) {
        h.setIdentity();
        fresh = true;
        scaled = false;
        continue;
      }
      res.message = "line search failed";
      break;
    }

    const Eigen::VectorXd s = x_ok - x;
    const Eigen::VectorXd y = g_ok - g;
    const double rel_step = sup_norm(s) / std::max(1.0, sup_norm(x));
    x = x_ok;
    f = f_ok;
    g = g_ok;
    res.x = x;
    res.f = f;
    res.g = g;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h * y;
      h += ((sy + y.dot(hy)) * rho * rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
      fresh = false;
    }

    if (sup_norm(g) < opt.grad_tol && rel_step < opt.step_tol) {
      res.converged = true;
      res.message = "converged";
      break;
    }
  }
  if (!res.converged && res.message.empty()) res.message = "iteration limit reached";
  return res;
}

}  // namespace fcmm
