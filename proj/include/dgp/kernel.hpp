#pragma once

#include <Eigen/Dense>

#include <vector>

#include "dgp/error.hpp"

namespace dgp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Hyperparameters of the squared-exponential ARD kernel plus the Gaussian
/// noise precision:
///
///   k(x, z) = signal_variance * exp(-1/2 sum_r ard_weights[r] (x_r - z_r)^2)
///
/// ard_weights are inverse squared lengthscales.  A zero weight switches the
/// corresponding input dimension off.
struct KernelParams {
  double signal_variance = 1.0;
  Vector ard_weights;
  double noise_precision = 1.0;

  Index dim() const { return ard_weights.size(); }

  // Throws InvalidInput when a positivity constraint does not hold.
  void validate() const;
};

/// Inducing input locations, one row per inducing point.
struct InducingInputs {
  Matrix Z;

  InducingInputs() = default;
  explicit InducingInputs(Matrix z) : Z(std::move(z)) {}

  Index size() const { return Z.rows(); }
  Index dim() const { return Z.cols(); }

  // Requires at least one row and pairwise distinct rows.
  void validate() const;
};

/// Diagonal Gaussian posterior q(X_i) = N(means_i, diag(variances_i)) over
/// the inputs.  Regression is the frozen case: variances are exactly zero
/// and the means are the observed inputs, never optimized.
struct LatentPosterior {
  Matrix means;
  Matrix variances;
  bool frozen = false;

  static LatentPosterior observed(const Matrix& X);
  static LatentPosterior latent(Matrix means, Matrix variances);

  Index size() const { return means.rows(); }
  Index dim() const { return means.cols(); }

  LatentPosterior rows(Index begin, Index count) const;
  void validate() const;
};

/// Kernel between every row of Xa and every row of Xb.
Matrix kernel_matrix(const Eigen::Ref<const Matrix>& Xa,
                     const Eigen::Ref<const Matrix>& Xb,
                     const KernelParams& params);

// Expectations of kernel quantities under q(X_i) for a single point.  With
// zero variance they reduce exactly to the plain kernel: psi1 is then the
// kernel row and psi2 its outer product.
double psi0(const Eigen::Ref<const RowVector>& mean,
            const Eigen::Ref<const RowVector>& variance,
            const KernelParams& params);
RowVector psi1(const Eigen::Ref<const RowVector>& mean,
               const Eigen::Ref<const RowVector>& variance,
               const InducingInputs& inducing, const KernelParams& params);
Matrix psi2(const Eigen::Ref<const RowVector>& mean,
            const Eigen::Ref<const RowVector>& variance,
            const InducingInputs& inducing, const KernelParams& params);

/// Gradient of a scalar objective with respect to the kernel part of the
/// global parameters.  Hyperparameter entries are derivatives with respect
/// to the logarithm of the parameter.
struct KernelGradient {
  Matrix Z;
  Vector log_ard_weights;
  double log_signal_variance = 0.0;

  static KernelGradient zeros(Index m, Index q);
  KernelGradient& operator+=(const KernelGradient& other);
};

/// Per-point psi statistics with the Z-only quantities precomputed once.
///
/// The weighted contractions used by the bound gradients live here too,
/// since they reuse the same intermediate terms.  Every method is const and
/// the object can be shared between threads.
class PsiStatistics {
 public:
  PsiStatistics(const InducingInputs& inducing, const KernelParams& params);

  Index m() const { return m_; }
  Index q() const { return q_; }

  void psi1(const double* mean, const double* variance, double* out) const;
  // Fills the full symmetric m x m matrix (column-major, leading dim m).
  void psi2(const double* mean, const double* variance, double* out) const;

  // Adds d/dtheta of  sum_j w1[j] psi1_j + sum_jk W2(j,k) psi2_jk  to grad
  // (kernel part) and to d_mean / d_variance (length q each).  W2 must be
  // symmetric.
  void accumulate_gradient(const double* mean, const double* variance,
                           const double* w1, const Matrix& W2,
                           KernelGradient& grad, double* d_mean,
                           double* d_variance) const;

 private:
  double signal_variance_;
  Vector alpha_;
  // Z transposed so that each inducing input is a contiguous column.
  Matrix zt_;
  Index m_;
  Index q_;
  // zbar_[r](j, k) = (Z_jr + Z_kr) / 2
  std::vector<Matrix> zbar_;
  // 1/4 sum_r alpha_r (Z_jr - Z_kr)^2
  Matrix pair_term_;
};

}  // namespace dgp
