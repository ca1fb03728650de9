#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "dgp/error.hpp"
#include "optim_common.hpp"

namespace dgp {

namespace {

constexpr double kC1 = 1e-4;
constexpr double kC2 = 0.9;
constexpr int kMaxLineEvals = 25;

struct Point {
  double step = 0.0;
  double f = 0.0;
  double slope = 0.0;  // directional derivative
  Vector g;
};

// Minimizer of the cubic through (a, fa, da), (b, fb, db), if it lies
// inside the safeguarded interval; bisection otherwise.
double interpolate(const Point& a, const Point& b) {
  const double lo = std::min(a.step, b.step);
  const double hi = std::max(a.step, b.step);
  const double d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.step - b.step);
  const double disc = d1 * d1 - a.slope * b.slope;
  double t = 0.5 * (lo + hi);
  if (std::isfinite(b.f) && disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b.step - a.step);
    const double c = b.step - (b.step - a.step) * (b.slope + d2 - d1) /
                                  (b.slope - a.slope + 2.0 * d2);
    if (std::isfinite(c)) t = c;
  }
  const double margin = 0.1 * (hi - lo);
  return std::clamp(t, lo + margin, hi - margin);
}

enum class Search { kOk, kFailed, kBudget };

// Strong Wolfe line search (Nocedal & Wright, Alg. 3.5/3.6).  On kOk `best`
// holds the accepted point.  Non-finite trials are treated as overshoots.
Search wolfe_search(detail::Tracker& t, const Vector& x, const Vector& dir,
                    const Point& start, double step0, Point& best) {
  auto trial = [&](double step) {
    Point p;
    p.step = step;
    p.f = t.eval(x + step * dir, p.g);
    p.slope = std::isfinite(p.f) ? p.g.dot(dir) : 0.0;
    return p;
  };
  auto armijo = [&](const Point& p) {
    return std::isfinite(p.f) && p.f <= start.f + kC1 * p.step * start.slope;
  };
  auto curvature = [&](const Point& p) {
    return std::abs(p.slope) <= -kC2 * start.slope;
  };

  Point prev = start;
  double step = step0;
  int evals = 0;
  Point lo, hi;
  bool zoom = false;
  while (!zoom) {
    if (!t.budget_left()) return Search::kBudget;
    Point p = trial(step);
    ++evals;
    if (!armijo(p) || (evals > 1 && p.f >= prev.f)) {
      lo = prev;
      hi = p;
      zoom = true;
    } else if (curvature(p)) {
      best = p;
      return Search::kOk;
    } else if (p.slope >= 0.0) {
      lo = p;
      hi = prev;
      zoom = true;
    } else {
      if (evals >= kMaxLineEvals) {
        best = p;
        return Search::kOk;
      }
      prev = p;
      step *= 2.0;
    }
  }

  while (evals < kMaxLineEvals) {
    if (!t.budget_left()) break;
    if (std::abs(hi.step - lo.step) <= 1e-16 * std::max(1.0, lo.step)) break;
    const double s = std::isfinite(hi.f) ? interpolate(lo, hi) : 0.5 * (lo.step + hi.step);
    Point p = trial(s);
    ++evals;
    if (!armijo(p) || p.f >= lo.f) {
      hi = p;
    } else {
      if (curvature(p)) {
        best = p;
        return Search::kOk;
      }
      if (p.slope * (hi.step - lo.step) >= 0.0) hi = lo;
      lo = p;
    }
  }
  // settle for sufficient decrease alone
  if (lo.step > 0.0 && armijo(lo)) {
    best = lo;
    return Search::kOk;
  }
  return t.budget_left() ? Search::kFailed : Search::kBudget;
}

}  // namespace

OptimResult lbfgs(const Objective& f, const Vector& x0, const OptimizerConfig& config) {
  config.validate();
  OptimResult out;
  detail::Tracker t(f, config, out);

  Vector x = x0;
  Point cur;
  cur.f = t.eval(x, cur.g);
  if (!std::isfinite(cur.f)) throw InvalidInput("objective is not finite at the starting point");
  if (t.accept(cur.f, cur.g)) return out;

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> a(config.history);

  while (t.budget_left()) {
    // two-loop recursion
    Vector dir = -cur.g;
    const std::size_t k = s_hist.size();
    for (std::size_t i = k; i-- > 0;) {
      a[i] = rho_hist[i] * s_hist[i].dot(dir);
      dir -= a[i] * y_hist[i];
    }
    double step0 = 1.0;
    if (k > 0) {
      dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      step0 = std::min(1.0, 1.0 / cur.g.norm());
    }
    for (std::size_t i = 0; i < k; ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(dir);
      dir += (a[i] - b) * s_hist[i];
    }

    cur.step = 0.0;
    cur.slope = cur.g.dot(dir);
    if (!(cur.slope < 0.0)) {
      if (k == 0) {
        out.reason = StopReason::kGradTol;  // zero gradient
        return out;
      }
      // not a descent direction: drop the curvature memory
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }

    Point next;
    const Search res = wolfe_search(t, x, dir, cur, step0, next);
    if (res == Search::kBudget) break;
    if (res == Search::kFailed) {
      if (k == 0) {
        out.reason = std::isfinite(out.trace.back()) ? StopReason::kLineSearch
                                                     : StopReason::kNonFinite;
        return out;
      }
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }

    Vector s = next.step * dir;
    Vector y = next.g - cur.g;
    x += s;
    cur.f = next.f;
    cur.g = next.g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > config.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (t.accept(cur.f, cur.g)) return out;
  }
  out.reason = StopReason::kMaxEvals;
  return out;
}

}  // namespace dgp
