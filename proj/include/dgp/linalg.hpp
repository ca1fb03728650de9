#pragma once

#include <Eigen/Cholesky>

#include "dgp/kernel.hpp"

namespace dgp {

/// Diagonal jitter schedule for K_mm, expressed as multiples of the signal
/// variance.  The first attempt uses `base`; each failure multiplies by
/// `growth` until `max` has been tried.  With `try_unjittered` a plain
/// factorization is attempted before the schedule starts.
struct JitterPolicy {
  double base = 1e-6;
  double max = 1e-2;
  double growth = 10.0;
  bool try_unjittered = false;
};

struct JitteredCholesky {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;  // absolute value added to the diagonal

  Matrix L() const { return llt.matrixL(); }
  double log_det() const;
};

// Factorizes K + jitter * I following the policy.  `scale` converts the
// relative schedule into absolute jitter (normally the signal variance).
// Throws FactorizationError when every level fails.
JitteredCholesky jittered_cholesky(const Matrix& K, double scale,
                                   const JitterPolicy& policy);

// Plain Cholesky for matrices that are PD by construction; throws
// FactorizationError with `what` in the message otherwise.
Eigen::LLT<Matrix> cholesky(const Matrix& A, const char* what);

}  // namespace dgp
