#include "dgp/kernel.hpp"

#include <cmath>
#include <string>

namespace dgp {

namespace {

// The one place the SE-ARD kernel is evaluated.  psi1/psi2 at zero variance
// route through here as well, which is what makes the zero-variance
// collapse exact rather than approximate.
inline double se_ard(const double* x, const double* z, const double* alpha,
                     Index q, double signal_variance) {
  double s = 0.0;
  for (Index r = 0; r < q; ++r) {
    const double diff = x[r] - z[r];
    s += alpha[r] * diff * diff;
  }
  return signal_variance * std::exp(-0.5 * s);
}

inline bool all_zero(const double* v, Index q) {
  for (Index r = 0; r < q; ++r) {
    if (v[r] != 0.0) return false;
  }
  return true;
}

}  // namespace

void KernelParams::validate() const {
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
    throw InvalidInput("signal variance must be positive and finite");
  }
  if (!(noise_precision > 0.0) || !std::isfinite(noise_precision)) {
    throw InvalidInput("noise precision must be positive and finite");
  }
  for (Index r = 0; r < ard_weights.size(); ++r) {
    if (!(ard_weights[r] >= 0.0) || !std::isfinite(ard_weights[r])) {
      throw InvalidInput("ARD weights must be non-negative and finite");
    }
  }
}

void InducingInputs::validate() const {
  if (Z.rows() < 1) throw InvalidInput("need at least one inducing input");
  if (!Z.allFinite()) throw InvalidInput("inducing inputs must be finite");
  for (Index j = 0; j < Z.rows(); ++j) {
    for (Index k = j + 1; k < Z.rows(); ++k) {
      if (Z.row(j) == Z.row(k)) {
        throw InvalidInput("inducing inputs " + std::to_string(j) + " and " +
                           std::to_string(k) + " coincide");
      }
    }
  }
}

LatentPosterior LatentPosterior::observed(const Matrix& X) {
  LatentPosterior out;
  out.means = X;
  out.variances = Matrix::Zero(X.rows(), X.cols());
  out.frozen = true;
  return out;
}

LatentPosterior LatentPosterior::latent(Matrix means, Matrix variances) {
  LatentPosterior out;
  out.means = std::move(means);
  out.variances = std::move(variances);
  out.frozen = false;
  out.validate();
  return out;
}

LatentPosterior LatentPosterior::rows(Index begin, Index count) const {
  LatentPosterior out;
  out.means = means.middleRows(begin, count);
  out.variances = variances.middleRows(begin, count);
  out.frozen = frozen;
  return out;
}

void LatentPosterior::validate() const {
  if (means.rows() != variances.rows() || means.cols() != variances.cols()) {
    throw DimensionError("latent means and variances differ in shape");
  }
  if (!means.allFinite() || !variances.allFinite()) {
    throw InvalidInput("latent posterior must be finite");
  }
  if ((variances.array() < 0.0).any()) {
    throw InvalidInput("latent variances must be non-negative");
  }
  if (frozen && (variances.array() != 0.0).any()) {
    throw InvalidInput("frozen latents must have zero variance");
  }
}

Matrix kernel_matrix(const Eigen::Ref<const Matrix>& Xa,
                     const Eigen::Ref<const Matrix>& Xb,
                     const KernelParams& params) {
  const Index q = params.dim();
  if (Xa.cols() != q || Xb.cols() != q) {
    throw DimensionError("kernel_matrix: inputs have " +
                         std::to_string(Xa.cols()) + " and " +
                         std::to_string(Xb.cols()) + " columns, kernel has " +
                         std::to_string(q));
  }
  const Matrix at = Xa.transpose();
  const Matrix bt = Xb.transpose();
  Matrix K(Xa.rows(), Xb.rows());
  const double* alpha = params.ard_weights.data();
  for (Index j = 0; j < Xb.rows(); ++j) {
    for (Index i = 0; i < Xa.rows(); ++i) {
      K(i, j) = se_ard(at.col(i).data(), bt.col(j).data(), alpha, q,
                       params.signal_variance);
    }
  }
  return K;
}

KernelGradient KernelGradient::zeros(Index m, Index q) {
  KernelGradient g;
  g.Z = Matrix::Zero(m, q);
  g.log_ard_weights = Vector::Zero(q);
  g.log_signal_variance = 0.0;
  return g;
}

KernelGradient& KernelGradient::operator+=(const KernelGradient& other) {
  Z += other.Z;
  log_ard_weights += other.log_ard_weights;
  log_signal_variance += other.log_signal_variance;
  return *this;
}

PsiStatistics::PsiStatistics(const InducingInputs& inducing,
                             const KernelParams& params)
    : signal_variance_(params.signal_variance),
      alpha_(params.ard_weights),
      zt_(inducing.Z.transpose()),
      m_(inducing.size()),
      q_(inducing.dim()) {
  if (params.dim() != q_) {
    throw DimensionError("inducing inputs have " + std::to_string(q_) +
                         " columns, kernel has " +
                         std::to_string(params.dim()));
  }
  zbar_.resize(static_cast<std::size_t>(q_));
  pair_term_ = Matrix::Zero(m_, m_);
  for (Index r = 0; r < q_; ++r) {
    Matrix& zb = zbar_[static_cast<std::size_t>(r)];
    zb.resize(m_, m_);
    for (Index k = 0; k < m_; ++k) {
      for (Index j = 0; j < m_; ++j) {
        zb(j, k) = 0.5 * (zt_(r, j) + zt_(r, k));
        const double diff = zt_(r, j) - zt_(r, k);
        pair_term_(j, k) += 0.25 * alpha_[r] * diff * diff;
      }
    }
  }
}

void PsiStatistics::psi1(const double* mean, const double* variance,
                         double* out) const {
  const double* alpha = alpha_.data();
  if (all_zero(variance, q_)) {
    for (Index j = 0; j < m_; ++j) {
      out[j] = se_ard(mean, zt_.col(j).data(), alpha, q_, signal_variance_);
    }
    return;
  }
  double log_pref = 0.0;
  Eigen::VectorXd inv_a(q_);
  for (Index r = 0; r < q_; ++r) {
    const double a = alpha[r] * variance[r] + 1.0;
    log_pref -= 0.5 * std::log(a);
    inv_a[r] = 1.0 / a;
  }
  for (Index j = 0; j < m_; ++j) {
    const double* z = zt_.col(j).data();
    double s = 0.0;
    for (Index r = 0; r < q_; ++r) {
      const double diff = mean[r] - z[r];
      s += alpha[r] * diff * diff * inv_a[r];
    }
    out[j] = signal_variance_ * std::exp(log_pref - 0.5 * s);
  }
}

void PsiStatistics::psi2(const double* mean, const double* variance,
                         double* out) const {
  Eigen::Map<Matrix> P(out, m_, m_);
  if (all_zero(variance, q_)) {
    RowVector k(m_);
    psi1(mean, variance, k.data());
    P.noalias() = k.transpose() * k;
    return;
  }
  const double* alpha = alpha_.data();
  double log_pref = 0.0;
  Eigen::VectorXd inv_b(q_);
  for (Index r = 0; r < q_; ++r) {
    const double b = 2.0 * alpha[r] * variance[r] + 1.0;
    log_pref -= 0.5 * std::log(b);
    inv_b[r] = 1.0 / b;
  }
  const double s4 = signal_variance_ * signal_variance_;
  for (Index k = 0; k < m_; ++k) {
    for (Index j = k; j < m_; ++j) {
      double s = pair_term_(j, k);
      for (Index r = 0; r < q_; ++r) {
        const double e = mean[r] - zbar_[static_cast<std::size_t>(r)](j, k);
        s += alpha[r] * e * e * inv_b[r];
      }
      const double v = s4 * std::exp(log_pref - s);
      P(j, k) = v;
      P(k, j) = v;
    }
  }
}

void PsiStatistics::accumulate_gradient(const double* mean,
                                        const double* variance,
                                        const double* w1, const Matrix& W2,
                                        KernelGradient& grad, double* d_mean,
                                        double* d_variance) const {
  const double* alpha = alpha_.data();

  RowVector k1(m_);
  psi1(mean, variance, k1.data());
  double sum1 = 0.0;
  for (Index j = 0; j < m_; ++j) {
    const double t = w1[j] * k1[j];
    if (t == 0.0) continue;
    sum1 += t;
    const double* z = zt_.col(j).data();
    for (Index r = 0; r < q_; ++r) {
      const double a = alpha[r] * variance[r] + 1.0;
      const double delta = mean[r] - z[r];
      const double g = t * alpha[r] * delta / a;
      d_mean[r] -= g;
      grad.Z(j, r) += g;
      d_variance[r] +=
          t * (-0.5 * alpha[r] / a + 0.5 * alpha[r] * alpha[r] * delta * delta / (a * a));
      grad.log_ard_weights[r] +=
          alpha[r] * t * (-0.5 * variance[r] / a - 0.5 * delta * delta / (a * a));
    }
  }

  Matrix T(m_, m_);
  psi2(mean, variance, T.data());
  T.array() *= W2.array();
  const double sum2 = T.sum();
  for (Index r = 0; r < q_; ++r) {
    const double b = 2.0 * alpha[r] * variance[r] + 1.0;
    const double inv_b = 1.0 / b;
    const Matrix& zb = zbar_[static_cast<std::size_t>(r)];
    double gmu = 0.0;
    double gvar = 0.0;
    double galpha = 0.0;
    for (Index k = 0; k < m_; ++k) {
      const double zk = zt_(r, k);
      for (Index j = 0; j < m_; ++j) {
        const double t = T(j, k);
        const double e = mean[r] - zb(j, k);
        const double delta = zt_(r, j) - zk;
        gmu += t * e;
        grad.Z(j, r) += 2.0 * t * alpha[r] * (e * inv_b - 0.5 * delta);
        gvar += t * e * e;
        galpha += t * (0.25 * delta * delta);
      }
    }
    // sum_jk T (-2 alpha e / b)
    d_mean[r] += -2.0 * alpha[r] * inv_b * gmu;
    // sum_jk T (-alpha / b + 2 alpha^2 e^2 / b^2)
    d_variance[r] += -alpha[r] * inv_b * sum2 +
                     2.0 * alpha[r] * alpha[r] * inv_b * inv_b * gvar;
    // sum_jk T (-S / b - Delta^2 / 4 - e^2 / b^2), times alpha for log scale
    grad.log_ard_weights[r] +=
        alpha[r] * (-variance[r] * inv_b * sum2 - galpha - inv_b * inv_b * gvar);
  }
  grad.log_signal_variance += sum1 + 2.0 * sum2;
}

double psi0(const Eigen::Ref<const RowVector>& mean,
            const Eigen::Ref<const RowVector>& variance,
            const KernelParams& params) {
  if (mean.size() != params.dim() || variance.size() != params.dim()) {
    throw DimensionError("psi0: row length does not match kernel dimension");
  }
  // k(x, x) = signal variance for every x, so the expectation is constant.
  return params.signal_variance;
}

RowVector psi1(const Eigen::Ref<const RowVector>& mean,
               const Eigen::Ref<const RowVector>& variance,
               const InducingInputs& inducing, const KernelParams& params) {
  if (mean.size() != params.dim() || variance.size() != params.dim()) {
    throw DimensionError("psi1: row length does not match kernel dimension");
  }
  const PsiStatistics stats(inducing, params);
  const RowVector mu = mean;
  const RowVector s = variance;
  RowVector out(inducing.size());
  stats.psi1(mu.data(), s.data(), out.data());
  return out;
}

Matrix psi2(const Eigen::Ref<const RowVector>& mean,
            const Eigen::Ref<const RowVector>& variance,
            const InducingInputs& inducing, const KernelParams& params) {
  if (mean.size() != params.dim() || variance.size() != params.dim()) {
    throw DimensionError("psi2: row length does not match kernel dimension");
  }
  const PsiStatistics stats(inducing, params);
  const RowVector mu = mean;
  const RowVector s = variance;
  Matrix out(inducing.size(), inducing.size());
  stats.psi2(mu.data(), s.data(), out.data());
  return out;
}

}  // namespace dgp
