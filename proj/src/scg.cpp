#include <algorithm>
#include <cmath>
#include <limits>

#include "dgp/error.hpp"
#include "optim_common.hpp"

namespace dgp {

void OptimizerConfig::validate() const {
  if (max_evals < 1) throw InvalidInput("max_evals must be at least 1");
  if (!(grad_tol >= 0.0) || !(obj_tol >= 0.0)) {
    throw InvalidInput("optimizer tolerances must be non-negative");
  }
  if (history < 1) throw InvalidInput("history must be at least 1");
}

const char* to_string(Method m) { return m == Method::kScg ? "scg" : "lbfgs"; }

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::kGradTol: return "grad_tol";
    case StopReason::kObjTol: return "obj_tol";
    case StopReason::kMaxEvals: return "max_evals";
    case StopReason::kNonFinite: return "non_finite";
    case StopReason::kLineSearch: return "line_search";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "scg") return Method::kScg;
  if (s == "lbfgs") return Method::kLbfgs;
  throw InvalidInput("unknown optimizer '" + s + "'");
}

OptimResult minimize(Method method, const Objective& f, const Vector& x0,
                     const OptimizerConfig& config) {
  return method == Method::kScg ? scg(f, x0, config) : lbfgs(f, x0, config);
}

OptimResult scg(const Objective& f, const Vector& x0, const OptimizerConfig& config) {
  config.validate();
  OptimResult out;
  detail::Tracker t(f, config, out);

  constexpr double kSigma0 = 1e-4;
  constexpr double kLambdaMin = 1e-15;
  constexpr double kLambdaMax = 1e100;

  Vector x = x0;
  Vector g;
  double fold = t.eval(x, g);
  if (!std::isfinite(fold)) throw InvalidInput("objective is not finite at the starting point");
  if (t.accept(fold, g)) return out;

  const Index n = x.size();
  Vector d = -g;
  Vector g_old = g;
  Vector gplus, gnew, xnew;
  double lambda = 1.0;
  double mu = 0.0, kappa = 0.0, theta = 0.0;
  bool success = true;
  Index nsuccess = 0;
  int bad_probes = 0;

  while (t.budget_left()) {
    if (success) {
      mu = d.dot(g);
      if (mu >= 0.0) {
        d = -g;
        mu = d.dot(g);
      }
      kappa = d.squaredNorm();
      if (kappa < std::numeric_limits<double>::epsilon() * g.squaredNorm()) {
        // conjugate direction cancelled out; restart along the gradient
        d = -g;
        mu = d.dot(g);
        kappa = d.squaredNorm();
        nsuccess = 0;
      }
      if (kappa == 0.0) {
        out.reason = StopReason::kGradTol;
        return out;
      }
      // curvature along d from a finite difference of gradients
      const double sigma = kSigma0 / std::sqrt(kappa) / std::pow(10.0, bad_probes);
      const double fplus = t.eval(x + sigma * d, gplus);
      if (!std::isfinite(fplus)) {
        if (++bad_probes > 8) {
          out.reason = StopReason::kNonFinite;
          return out;
        }
        continue;
      }
      bad_probes = 0;
      theta = d.dot(gplus - g) / sigma;
      if (!t.budget_left()) break;
    }

    double delta = theta + lambda * kappa;
    if (delta <= 0.0) {
      delta = lambda * kappa;
      lambda -= theta / kappa;
    }
    const double alpha = -mu / delta;
    xnew = x + alpha * d;
    const double fnew = t.eval(xnew, gnew);
    const double comparison = 2.0 * (fnew - fold) / (alpha * mu);

    if (std::isfinite(fnew) && comparison >= 0.0) {
      success = true;
      ++nsuccess;
      x = xnew;
      fold = fnew;
      g_old = g;
      g = gnew;
      if (t.accept(fnew, g)) return out;
    } else {
      success = false;
    }

    if (!std::isfinite(fnew) || comparison < 0.25) {
      lambda = std::min(4.0 * lambda, kLambdaMax);
    } else if (comparison > 0.75) {
      lambda = std::max(0.5 * lambda, kLambdaMin);
    }
    if (lambda >= kLambdaMax) {
      out.reason = std::isfinite(fnew) ? StopReason::kLineSearch : StopReason::kNonFinite;
      return out;
    }

    if (nsuccess == n) {
      d = -g;
      nsuccess = 0;
    } else if (success) {
      const double gamma = (g_old - g).dot(g) / mu;
      d = gamma * d - g;
    }
  }
  out.reason = StopReason::kMaxEvals;
  return out;
}

}  // namespace dgp
