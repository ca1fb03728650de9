#pragma once

// Independent reference computations used only by the tests.  Nothing here
// calls into the bound or psi-statistic code paths it is used to check.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "dgp/kernel.hpp"

namespace dgp::oracle {

inline double kernel_entry(const RowVector& x, const RowVector& z,
                           const KernelParams& p) {
  double s = 0.0;
  for (Index r = 0; r < x.size(); ++r) {
    s += p.ard_weights[r] * (x[r] - z[r]) * (x[r] - z[r]);
  }
  return p.signal_variance * std::exp(-0.5 * s);
}

inline Matrix kernel(const Matrix& A, const Matrix& B, const KernelParams& p) {
  Matrix K(A.rows(), B.rows());
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < B.rows(); ++j) {
      K(i, j) = kernel_entry(A.row(i), B.row(j), p);
    }
  }
  return K;
}

// log N(Y; 0, K + beta^-1 I), summed over output columns.
inline double exact_gp_lml(const Matrix& X, const Matrix& Y,
                           const KernelParams& p) {
  Matrix K = kernel(X, X, p);
  K.diagonal().array() += 1.0 / p.noise_precision;
  Eigen::LLT<Matrix> llt(K);
  const Matrix L = llt.matrixL();
  const double log_det = 2.0 * L.diagonal().array().log().sum();
  const Matrix alpha = llt.solve(Y);
  const double n = static_cast<double>(X.rows());
  double out = 0.0;
  for (Index c = 0; c < Y.cols(); ++c) {
    out += -0.5 * Y.col(c).dot(alpha.col(c)) - 0.5 * log_det -
           0.5 * n * std::log(2.0 * std::numbers::pi);
  }
  return out;
}

struct ExactPrediction {
  Matrix mean;
  Vector variance;
};

inline ExactPrediction exact_gp_predict(const Matrix& X, const Matrix& Y,
                                        const KernelParams& p,
                                        const Matrix& Xs, bool include_noise) {
  Matrix K = kernel(X, X, p);
  K.diagonal().array() += 1.0 / p.noise_precision;
  const Matrix Ks = kernel(Xs, X, p);
  const Eigen::FullPivLU<Matrix> lu(K);
  ExactPrediction out;
  out.mean = Ks * lu.solve(Y);
  out.variance.resize(Xs.rows());
  for (Index i = 0; i < Xs.rows(); ++i) {
    const Vector ks = Ks.row(i).transpose();
    out.variance[i] = p.signal_variance - ks.dot(lu.solve(ks));
    if (include_noise) out.variance[i] += 1.0 / p.noise_precision;
  }
  return out;
}

// Closed forms written out independently of PsiStatistics (scalar loops,
// product of per-dimension factors).
inline double psi1_entry(const RowVector& mu, const RowVector& S,
                         const RowVector& z, const KernelParams& p) {
  double out = p.signal_variance;
  for (Index r = 0; r < mu.size(); ++r) {
    const double a = p.ard_weights[r] * S[r] + 1.0;
    out *= std::exp(-0.5 * p.ard_weights[r] * (mu[r] - z[r]) * (mu[r] - z[r]) / a) /
           std::sqrt(a);
  }
  return out;
}

inline double psi2_entry(const RowVector& mu, const RowVector& S,
                         const RowVector& zj, const RowVector& zk,
                         const KernelParams& p) {
  double out = p.signal_variance * p.signal_variance;
  for (Index r = 0; r < mu.size(); ++r) {
    const double al = p.ard_weights[r];
    const double b = 2.0 * al * S[r] + 1.0;
    const double zbar = 0.5 * (zj[r] + zk[r]);
    out *= std::exp(-0.25 * al * (zj[r] - zk[r]) * (zj[r] - zk[r]) -
                    al * (mu[r] - zbar) * (mu[r] - zbar) / b) /
           std::sqrt(b);
  }
  return out;
}

struct NaiveStats {
  double A = 0, B = 0, KL = 0;
  Matrix C, D;
};

inline NaiveStats naive_stats(const Matrix& Y, const Matrix& mu,
                              const Matrix& S, bool observed,
                              const Matrix& Z, const KernelParams& p) {
  NaiveStats s;
  const Index m = Z.rows();
  s.C = Matrix::Zero(m, Y.cols());
  s.D = Matrix::Zero(m, m);
  for (Index i = 0; i < Y.rows(); ++i) {
    s.A += Y.row(i).squaredNorm();
    s.B += p.signal_variance;
    for (Index j = 0; j < m; ++j) {
      s.C.row(j) += psi1_entry(mu.row(i), S.row(i), Z.row(j), p) * Y.row(i);
      for (Index k = 0; k < m; ++k) {
        s.D(j, k) += psi2_entry(mu.row(i), S.row(i), Z.row(j), Z.row(k), p);
      }
    }
    if (!observed) {
      for (Index r = 0; r < mu.cols(); ++r) {
        s.KL += 0.5 * (mu(i, r) * mu(i, r) + S(i, r) - std::log(S(i, r)) - 1.0);
      }
    }
  }
  return s;
}

// The collapsed bound written directly from its definition with dense LU
// inverses and determinants.  `jitter` is the absolute diagonal jitter on K_mm.
inline double naive_bound(const NaiveStats& s, const Matrix& Z,
                          const KernelParams& p, double n, double jitter) {
  const double d = static_cast<double>(s.C.cols());
  const double beta = p.noise_precision;
  Matrix Kmm = kernel(Z, Z, p);
  Kmm.diagonal().array() += jitter;
  const Matrix P = Kmm + beta * s.D;
  const Eigen::FullPivLU<Matrix> lk(Kmm), lp(P);
  return -0.5 * n * d * std::log(2.0 * std::numbers::pi) +
         0.5 * n * d * std::log(beta) + 0.5 * d * std::log(lk.determinant()) -
         0.5 * d * std::log(lp.determinant()) - 0.5 * beta * s.A -
         0.5 * beta * d * s.B + 0.5 * beta * d * (lk.inverse() * s.D).trace() +
         0.5 * beta * beta * (s.C.transpose() * lp.inverse() * s.C).trace() -
         s.KL;
}

// Central differences of f around x, step h in every coordinate.
inline Vector central_difference(const std::function<double(const Vector&)>& f,
                                 const Vector& x, double h) {
  Vector g(x.size());
  Vector xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

struct MonteCarloEstimate {
  Matrix mean;
  Matrix stderr_;
};

// Sample average of g(x) for x ~ N(mu, diag S).
inline MonteCarloEstimate monte_carlo(
    const RowVector& mu, const RowVector& S, std::size_t samples,
    std::uint64_t seed, Index rows, Index cols,
    const std::function<void(const RowVector&, Matrix&)>& g) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix sum = Matrix::Zero(rows, cols);
  Matrix sum_sq = Matrix::Zero(rows, cols);
  Matrix value(rows, cols);
  RowVector x(mu.size());
  for (std::size_t s = 0; s < samples; ++s) {
    for (Index r = 0; r < mu.size(); ++r) {
      x[r] = mu[r] + std::sqrt(S[r]) * normal(rng);
    }
    g(x, value);
    sum += value;
    sum_sq += value.cwiseProduct(value);
  }
  const double ns = static_cast<double>(samples);
  MonteCarloEstimate out;
  out.mean = sum / ns;
  const Matrix var = (sum_sq / ns - out.mean.cwiseProduct(out.mean)) * ns / (ns - 1.0);
  out.stderr_ = (var.array().max(0.0) / ns).sqrt();
  return out;
}

}  // namespace dgp::oracle
