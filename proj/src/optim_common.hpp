#pragma once

#include <cmath>
#include <deque>

#include "dgp/optim.hpp"

namespace dgp::detail {

// Counts evaluations, records the trace and remembers the best point.
class Tracker {
 public:
  Tracker(const Objective& f, const OptimizerConfig& config, OptimResult& out)
      : f_(f), config_(config), out_(out) {}

  bool budget_left() const { return out_.evals < config_.max_evals; }

  double eval(const Vector& x, Vector& grad) {
    grad.resize(x.size());
    double v = f_(x, grad);
    ++out_.evals;
    if (!std::isfinite(v) || !grad.allFinite()) v = std::numeric_limits<double>::infinity();
    out_.trace.push_back(v);
    if (v < out_.value || out_.x.size() == 0) {
      out_.x = x;
      out_.value = v;
      out_.grad = grad;
    }
    return v;
  }

  // Records an accepted iterate; returns true when a stopping rule fires.
  bool accept(double value, const Vector& grad) {
    out_.accepted.push_back(value);
    ++out_.iterations;
    if (grad.lpNorm<Eigen::Infinity>() < config_.grad_tol) {
      out_.reason = StopReason::kGradTol;
      return true;
    }
    const auto& a = out_.accepted;
    if (a.size() > 5) {
      const double old = a[a.size() - 6];
      if (std::abs(old - value) <=
          config_.obj_tol * std::max(std::abs(old), std::abs(value))) {
        out_.reason = StopReason::kObjTol;
        return true;
      }
    }
    return false;
  }

 private:
  const Objective& f_;
  const OptimizerConfig& config_;
  OptimResult& out_;
};

}  // namespace dgp::detail
