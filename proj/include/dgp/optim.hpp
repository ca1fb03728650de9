#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dgp/kernel.hpp"

namespace dgp {

// Returns f(x) and writes the gradient into `grad` (already sized).  A
// non-finite return marks x as infeasible; the optimizers back off from it.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct OptimizerConfig {
  std::size_t max_evals = 500;
  double grad_tol = 1e-6;   // on the gradient infinity-norm
  double obj_tol = 1e-10;   // relative change over the last 5 accepted steps
  std::size_t history = 10; // L-BFGS memory

  void validate() const;
};

enum class Method { kScg, kLbfgs };

enum class StopReason {
  kGradTol,
  kObjTol,
  kMaxEvals,
  kNonFinite,   // could not get back to finite values
  kLineSearch,  // no acceptable step along any direction tried
};

const char* to_string(Method m);
const char* to_string(StopReason r);
Method parse_method(const std::string& s);

struct OptimResult {
  Vector x;  // best point seen
  double value = 0.0;
  Vector grad;
  std::vector<double> trace;     // every evaluation, in call order
  std::vector<double> accepted;  // value after each accepted step, x0 first
  std::size_t evals = 0;
  std::size_t iterations = 0;
  StopReason reason = StopReason::kMaxEvals;

  bool converged() const {
    return reason == StopReason::kGradTol || reason == StopReason::kObjTol;
  }
  bool flagged() const {
    return reason == StopReason::kNonFinite || reason == StopReason::kLineSearch;
  }
};

// Both minimize.  Throws InvalidInput when f(x0) or its gradient is not
// finite.

/// Scaled conjugate gradients (Moller 1993, as in Netlab): a trust-region
/// scaled CG with no user step length.
OptimResult scg(const Objective& f, const Vector& x0, const OptimizerConfig& config);

/// L-BFGS with a strong-Wolfe line search.
OptimResult lbfgs(const Objective& f, const Vector& x0, const OptimizerConfig& config);

OptimResult minimize(Method method, const Objective& f, const Vector& x0,
                     const OptimizerConfig& config);

}  // namespace dgp
