#include "dgp/linalg.hpp"

#include <cmath>
#include <string>

namespace dgp {

namespace {

bool usable(const Eigen::LLT<Matrix>& llt) {
  if (llt.info() != Eigen::Success) return false;
  const auto diag = llt.matrixLLT().diagonal();
  return diag.allFinite() && (diag.array() > 0.0).all();
}

}  // namespace

double JitteredCholesky::log_det() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

JitteredCholesky jittered_cholesky(const Matrix& K, double scale,
                                   const JitterPolicy& policy) {
  if (K.rows() != K.cols()) throw DimensionError("cholesky of non-square matrix");
  JitteredCholesky out;
  if (policy.try_unjittered) {
    out.llt.compute(K);
    if (usable(out.llt)) {
      out.jitter = 0.0;
      return out;
    }
  }
  double level = policy.base;
  const Index n = K.rows();
  while (true) {
    const double jitter = level * scale;
    Matrix Kj = K;
    Kj.diagonal().array() += jitter;
    out.llt.compute(Kj);
    if (usable(out.llt)) {
      out.jitter = jitter;
      return out;
    }
    if (level >= policy.max || !(policy.growth > 1.0) || level <= 0.0) break;
    level = std::min(level * policy.growth, policy.max);
  }
  throw FactorizationError("K_mm (" + std::to_string(n) + "x" +
                           std::to_string(n) +
                           ") not positive definite at maximum jitter " +
                           std::to_string(policy.max * scale));
}

Eigen::LLT<Matrix> cholesky(const Matrix& A, const char* what) {
  Eigen::LLT<Matrix> llt(A);
  if (!usable(llt)) {
    throw FactorizationError(std::string("cholesky failed: ") + what);
  }
  return llt;
}

}  // namespace dgp
