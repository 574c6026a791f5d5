// Limited-memory BFGS with a strong-Wolfe line search.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

namespace unmix {

struct LbfgsOptions {
  int history = 10;
  int max_iter = 200;
  double grad_tol = 1e-6;       // on max |g_i|
  double progress_tol = 1e-12;  // stop when |f_k - f_{k+1}| falls below this
  int max_linesearch = 30;
  double c1 = 1e-4;
  double c2 = 0.9;
};

enum class LbfgsStatus {
  kGradientTolerance,
  kNoProgress,
  kMaxIterations,
  kLineSearchFailed,
  kNonFinite,
};

inline const char* to_string(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::kGradientTolerance: return "gradient_tolerance";
    case LbfgsStatus::kNoProgress: return "no_progress";
    case LbfgsStatus::kMaxIterations: return "max_iterations";
    case LbfgsStatus::kLineSearchFailed: return "line_search_failed";
    case LbfgsStatus::kNonFinite: return "non_finite";
  }
  return "unknown";
}

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  LbfgsStatus status = LbfgsStatus::kMaxIterations;
  std::vector<double> trace;  // objective after each accepted iterate
};

namespace detail {

struct LinePoint {
  double a = 0.0, f = 0.0, d = 0.0;  // step, value, directional derivative
  Eigen::VectorXd x, g;
};

// Minimizer of the cubic through (a, fa, da) and (b, fb, db), clipped to a
// safe interior of [min(a,b), max(a,b)]; bisection when degenerate.
inline double cubic_step(const LinePoint& lo, const LinePoint& hi) {
  const double a = lo.a, b = hi.a;
  const double left = std::min(a, b), right = std::max(a, b);
  double t = 0.5 * (a + b);
  if (std::isfinite(hi.f) && std::isfinite(hi.d)) {
    const double d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (a - b);
    const double disc = d1 * d1 - lo.d * hi.d;
    if (disc >= 0.0) {
      const double d2 = std::copysign(std::sqrt(disc), b - a);
      const double denom = hi.d - lo.d + 2.0 * d2;
      if (denom != 0.0) t = b - (b - a) * (hi.d + d2 - d1) / denom;
    }
  }
  const double margin = 0.1 * (right - left);
  if (!std::isfinite(t) || t < left + margin || t > right - margin) t = 0.5 * (a + b);
  return t;
}

}  // namespace detail

/// Minimizes `fg`, a callable `double(const VectorXd& x, VectorXd& grad)`.
/// Every accepted step satisfies the sufficient-decrease condition, so the
/// objective never increases along the iterates.
template <typename Objective>
LbfgsResult lbfgs_minimize(Objective&& fg, Eigen::VectorXd x0,
                           const LbfgsOptions& opt = {}) {
  using Eigen::VectorXd;
  LbfgsResult res;
  const Eigen::Index n = x0.size();
  VectorXd g(n);
  double f = fg(x0, g);
  res.evaluations = 1;
  res.x = std::move(x0);
  res.f = f;
  res.trace.push_back(f);
  if (!std::isfinite(f) || !g.allFinite()) {
    res.status = LbfgsStatus::kNonFinite;
    return res;
  }
  if (n == 0 || g.lpNorm<Eigen::Infinity>() <= opt.grad_tol) {
    res.status = LbfgsStatus::kGradientTolerance;
    return res;
  }

  std::deque<VectorXd> S, Y;
  std::deque<double> rho;
  bool hit_nonfinite = false;

  auto eval = [&](const VectorXd& x, double a, const VectorXd& dir) {
    detail::LinePoint p;
    p.a = a;
    p.x = x + a * dir;
    p.g.resize(n);
    p.f = fg(p.x, p.g);
    ++res.evaluations;
    if (!std::isfinite(p.f) || !p.g.allFinite()) {
      hit_nonfinite = true;
      p.f = std::numeric_limits<double>::infinity();
      p.d = std::numeric_limits<double>::quiet_NaN();
    } else {
      p.d = p.g.dot(dir);
    }
    return p;
  };

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    // Two-loop recursion for d = -H g.
    VectorXd q = g;
    std::vector<double> alpha(S.size());
    for (size_t i = S.size(); i-- > 0;) {
      alpha[i] = rho[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    double a0 = 1.0;
    if (!S.empty()) {
      q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    } else {
      a0 = std::min(1.0, 1.0 / g.lpNorm<1>());
    }
    for (size_t i = 0; i < S.size(); ++i) {
      const double beta = rho[i] * Y[i].dot(q);
      q += S[i] * (alpha[i] - beta);
    }
    VectorXd dir = -q;
    double d0 = g.dot(dir);
    if (!(d0 < 0.0)) {
      S.clear(), Y.clear(), rho.clear();
      dir = -g;
      d0 = -g.squaredNorm();
      a0 = std::min(1.0, 1.0 / g.lpNorm<1>());
    }

    // Strong-Wolfe search: bracket, then zoom.
    detail::LinePoint start{0.0, f, d0, res.x, g};
    detail::LinePoint prev = start, best = start;
    bool found = false;
    double a = a0;
    int evals = 0;
    auto armijo = [&](const detail::LinePoint& p) {
      return p.f <= f + opt.c1 * p.a * d0;
    };
    auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi) {
      while (evals < opt.max_linesearch) {
        const double t = detail::cubic_step(lo, hi);
        detail::LinePoint p = eval(res.x, t, dir);
        ++evals;
        if (!armijo(p) || p.f >= lo.f) {
          hi = std::move(p);
        } else {
          if (std::abs(p.d) <= -opt.c2 * d0) {
            best = std::move(p);
            return true;
          }
          if (p.d * (hi.a - lo.a) >= 0.0) hi = lo;
          lo = std::move(p);
        }
        if (std::abs(hi.a - lo.a) <= 1e-16 * std::max(1.0, lo.a)) break;
      }
      // Fall back to the best sufficient-decrease point seen.
      if (lo.a > 0.0) {
        best = std::move(lo);
        return true;
      }
      return false;
    };
    while (evals < opt.max_linesearch) {
      detail::LinePoint p = eval(res.x, a, dir);
      ++evals;
      if (!armijo(p) || (prev.a > 0.0 && p.f >= prev.f)) {
        found = zoom(prev, std::move(p));
        break;
      }
      if (std::abs(p.d) <= -opt.c2 * d0) {
        best = std::move(p);
        found = true;
        break;
      }
      if (p.d >= 0.0) {
        found = zoom(std::move(p), prev);
        break;
      }
      prev = std::move(p);
      a *= 2.0;
    }
    if (!found && prev.a > 0.0) {
      best = prev;
      found = true;
    }
    if (!found) {
      res.status = hit_nonfinite ? LbfgsStatus::kNonFinite : LbfgsStatus::kLineSearchFailed;
      return res;
    }

    VectorXd s = best.x - res.x;
    VectorXd y = best.g - g;
    const double sy = s.dot(y);
    const double f_old = f;
    res.x = std::move(best.x);
    g = std::move(best.g);
    f = best.f;
    res.f = f;
    res.iterations = iter + 1;
    res.trace.push_back(f);
    if (sy > 1e-12 * y.squaredNorm() && sy > 0.0) {
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
      if (int(S.size()) > opt.history) S.pop_front(), Y.pop_front(), rho.pop_front();
    }
    if (g.lpNorm<Eigen::Infinity>() <= opt.grad_tol) {
      res.status = LbfgsStatus::kGradientTolerance;
      return res;
    }
    if (std::abs(f_old - f) < opt.progress_tol ||
        (!S.empty() && S.back().lpNorm<Eigen::Infinity>() < opt.progress_tol)) {
      res.status = LbfgsStatus::kNoProgress;
      return res;
    }
  }
  res.status = LbfgsStatus::kMaxIterations;
  return res;
}

}  // namespace unmix
