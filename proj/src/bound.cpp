#include "dgp/bound.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace dgp {

namespace {

void check_block(const Eigen::Ref<const Matrix>& Y,
                 const LatentPosterior& latents,
                 const InducingInputs& inducing, const KernelParams& params) {
  if (Y.rows() != latents.size()) {
    throw DimensionError("block has " + std::to_string(Y.rows()) +
                         " output rows but " + std::to_string(latents.size()) +
                         " latent rows");
  }
  if (latents.means.cols() != params.dim() ||
      latents.variances.cols() != params.dim() ||
      inducing.dim() != params.dim()) {
    throw DimensionError("latent, inducing and kernel dimensions disagree");
  }
}

Matrix symmetrized(const Matrix& M) { return 0.5 * (M + M.transpose()); }

}  // namespace

PartialSums PartialSums::zeros(Index m, Index d) {
  PartialSums p;
  p.C = Matrix::Zero(m, d);
  p.D = Matrix::Zero(m, m);
  return p;
}

PartialSums& PartialSums::operator+=(const PartialSums& other) {
  if (C.rows() != other.C.rows() || C.cols() != other.C.cols() ||
      D.rows() != other.D.rows()) {
    throw DimensionError("cannot merge partial sums of different shapes");
  }
  A += other.A;
  B += other.B;
  KL += other.KL;
  C += other.C;
  D += other.D;
  count += other.count;
  return *this;
}

PartialSums merge(const PartialSums& a, const PartialSums& b) {
  PartialSums out = a;
  out += b;
  return out;
}

PartialSums reduce(std::span<const PartialSums> parts) {
  if (parts.empty()) throw InvalidInput("reduce over no partial sums");
  PartialSums out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out += parts[i];
  return out;
}

double kl_diag_gaussian(const Eigen::Ref<const RowVector>& mean,
                        const Eigen::Ref<const RowVector>& variance) {
  if (mean.size() != variance.size()) {
    throw DimensionError("kl_diag_gaussian: mean/variance length mismatch");
  }
  double kl = 0.0;
  for (Index r = 0; r < mean.size(); ++r) {
    const double s = variance[r];
    if (!(s > 0.0)) {
      throw InvalidInput("kl_diag_gaussian: latent variance must be > 0");
    }
    kl += mean[r] * mean[r] + s - std::log(s) - 1.0;
  }
  return 0.5 * kl;
}

PartialSums local_terms(const Eigen::Ref<const Matrix>& Y,
                        const LatentPosterior& latents,
                        const InducingInputs& inducing,
                        const KernelParams& params) {
  check_block(Y, latents, inducing, params);
  const Index n = Y.rows();
  const Index m = inducing.size();
  PartialSums out = PartialSums::zeros(m, Y.cols());
  out.count = static_cast<std::uint64_t>(n);
  if (n == 0) return out;

  out.A = Y.squaredNorm();
  for (Index i = 0; i < n; ++i) out.B += params.signal_variance;

  if (latents.frozen) {
    const Matrix K = kernel_matrix(latents.means, inducing.Z, params);
    out.C.noalias() = K.transpose() * Y;
    out.D.noalias() = K.transpose() * K;
    return out;
  }

  const PsiStatistics stats(inducing, params);
  const Matrix mt = latents.means.transpose();
  const Matrix st = latents.variances.transpose();
  Matrix psi1t(m, n);
  Matrix p2(m, m);
  for (Index i = 0; i < n; ++i) {
    stats.psi1(mt.col(i).data(), st.col(i).data(), psi1t.col(i).data());
    stats.psi2(mt.col(i).data(), st.col(i).data(), p2.data());
    out.D += p2;
    out.KL += kl_diag_gaussian(mt.col(i).transpose(), st.col(i).transpose());
  }
  out.C.noalias() = psi1t * Y;
  return out;
}

StatisticWeights statistic_weights(const Accumulators& accum,
                                   double noise_precision, Index d) {
  const double beta = noise_precision;
  const double dd = static_cast<double>(d);
  StatisticWeights w;
  w.dB = -0.5 * beta * dd;
  w.dC = beta * beta * accum.P_inv_C;
  w.dD = 0.5 * beta * dd * (accum.Kmm_inv - accum.P_inv) -
         0.5 * beta * beta * beta * accum.P_inv_C * accum.P_inv_C.transpose();
  w.dD = symmetrized(w.dD);
  return w;
}

GlobalGradient GlobalGradient::zeros(Index m, Index q) {
  GlobalGradient g;
  g.kernel = KernelGradient::zeros(m, q);
  return g;
}

GlobalGradient& GlobalGradient::operator+=(const GlobalGradient& other) {
  kernel += other.kernel;
  log_noise_precision += other.log_noise_precision;
  return *this;
}

LocalGradient local_gradients(const Eigen::Ref<const Matrix>& Y,
                              const LatentPosterior& latents,
                              const InducingInputs& inducing,
                              const KernelParams& params,
                              const Accumulators& accum) {
  check_block(Y, latents, inducing, params);
  const Index n = Y.rows();
  const Index m = inducing.size();
  const Index q = params.dim();
  if (accum.P_inv_C.rows() != m || accum.P_inv_C.cols() != Y.cols()) {
    throw DimensionError("accumulators do not match block shape");
  }
  const StatisticWeights w =
      statistic_weights(accum, params.noise_precision, Y.cols());
  const double sf2 = params.signal_variance;
  const Vector& alpha = params.ard_weights;

  LocalGradient out;
  out.global = GlobalGradient::zeros(m, q);
  KernelGradient& g = out.global.kernel;
  if (n == 0) return out;

  // psi0 = signal variance for every point
  g.log_signal_variance += w.dB * sf2 * static_cast<double>(n);

  if (latents.frozen) {
    const Matrix& X = latents.means;
    const Matrix K = kernel_matrix(X, inducing.Z, params);
    // d/dK_ij of sum_ij (Y dC^T)_ij K_ij + sum_i k_i dD k_i^T
    Matrix M = Y * w.dC.transpose() + 2.0 * K * w.dD;
    M.array() *= K.array();
    g.log_signal_variance += M.sum();
    for (Index r = 0; r < q; ++r) {
      for (Index j = 0; j < m; ++j) {
        const double zjr = inducing.Z(j, r);
        double s1 = 0.0;
        double s2 = 0.0;
        for (Index i = 0; i < n; ++i) {
          const double diff = X(i, r) - zjr;
          s1 += M(i, j) * diff;
          s2 += M(i, j) * diff * diff;
        }
        g.Z(j, r) += alpha[r] * s1;
        g.log_ard_weights[r] += -0.5 * alpha[r] * s2;
      }
    }
    return out;
  }

  out.d_means = Matrix::Zero(n, q);
  out.d_log_variances = Matrix::Zero(n, q);
  const PsiStatistics stats(inducing, params);
  const Matrix mt = latents.means.transpose();
  const Matrix st = latents.variances.transpose();
  const Matrix w1t = w.dC * Y.transpose();  // m x n
  Vector d_mean(q);
  Vector d_var(q);
  for (Index i = 0; i < n; ++i) {
    d_mean.setZero();
    d_var.setZero();
    stats.accumulate_gradient(mt.col(i).data(), st.col(i).data(),
                              w1t.col(i).data(), w.dD, g, d_mean.data(),
                              d_var.data());
    for (Index r = 0; r < q; ++r) {
      const double mu = mt(r, i);
      const double s = st(r, i);
      // minus the KL gradient
      out.d_means(i, r) = d_mean[r] - mu;
      out.d_log_variances(i, r) = s * d_var[r] - 0.5 * (s - 1.0);
    }
  }
  return out;
}

GlobalStep assemble_global(const PartialSums& totals,
                           const InducingInputs& inducing,
                           const KernelParams& params,
                           const JitterPolicy& jitter) {
  const Index m = inducing.size();
  const Index q = inducing.dim();
  const Index d = totals.C.cols();
  if (params.dim() != q) throw DimensionError("kernel/inducing dimension mismatch");
  if (totals.C.rows() != m || totals.D.rows() != m || totals.D.cols() != m) {
    throw DimensionError("partial sums do not match the number of inducing inputs");
  }
  const double beta = params.noise_precision;
  const double sf2 = params.signal_variance;
  const double n = static_cast<double>(totals.count);
  const double dd = static_cast<double>(d);

  const Matrix Kraw = kernel_matrix(inducing.Z, inducing.Z, params);
  const JitteredCholesky chol = jittered_cholesky(Kraw, sf2, jitter);
  const Matrix L = chol.L();
  const Matrix Linv =
      L.triangularView<Eigen::Lower>().solve(Matrix::Identity(m, m));

  // K_mm + beta D = L (I + A) L^T with A = beta L^-1 D L^-T
  const Matrix Amat = symmetrized(beta * Linv * totals.D * Linv.transpose());
  Matrix Bmat = Amat;
  Bmat.diagonal().array() += 1.0;
  const Eigen::LLT<Matrix> llt_b = cholesky(Bmat, "I + beta L^-1 D L^-T");
  const Matrix LB = llt_b.matrixL();
  const double log_det_b = 2.0 * LB.diagonal().array().log().sum();

  const Matrix Xinv = LB.triangularView<Eigen::Lower>().solve(Linv);  // LB^-1 L^-1
  const Matrix E = Xinv * totals.C;

  GlobalStep out;
  out.jitter = chol.jitter;
  out.accum.P_inv = symmetrized(Xinv.transpose() * Xinv);
  out.accum.P_inv_C = Xinv.transpose() * E;
  out.accum.Kmm_inv = symmetrized(Linv.transpose() * Linv);

  const double tr_kinv_d = Amat.trace() / beta;
  const double quad = E.squaredNorm();  // Tr(C^T P^-1 C)
  out.value = -0.5 * n * dd * std::log(2.0 * std::numbers::pi) +
              0.5 * n * dd * std::log(beta) - 0.5 * dd * log_det_b -
              0.5 * beta * totals.A - 0.5 * beta * dd * totals.B +
              0.5 * beta * dd * tr_kinv_d + 0.5 * beta * beta * quad - totals.KL;

  // dF/dK_mm
  const Matrix& Pc = out.accum.P_inv_C;
  const Matrix kinv_d_kinv = Linv.transpose() * Amat * Linv / beta;
  const Matrix GK = symmetrized(0.5 * dd * (out.accum.Kmm_inv - out.accum.P_inv) -
                                0.5 * beta * dd * kinv_d_kinv -
                                0.5 * beta * beta * Pc * Pc.transpose());

  out.grad = GlobalGradient::zeros(m, q);
  KernelGradient& g = out.grad.kernel;
  const Vector& alpha = params.ard_weights;
  Matrix GKK = GK.cwiseProduct(Kraw);
  for (Index r = 0; r < q; ++r) {
    double ga = 0.0;
    for (Index k = 0; k < m; ++k) {
      for (Index j = 0; j < m; ++j) {
        const double diff = inducing.Z(j, r) - inducing.Z(k, r);
        g.Z(j, r) -= 2.0 * alpha[r] * GKK(j, k) * diff;
        ga += GKK(j, k) * diff * diff;
      }
    }
    g.log_ard_weights[r] = -0.5 * alpha[r] * ga;
  }
  // K_mm and its jitter are both proportional to the signal variance
  g.log_signal_variance = GKK.sum() + chol.jitter * GK.trace();

  const double tr_pinv_d = (out.accum.P_inv * totals.D).trace();
  const double quad_d = (Pc.transpose() * totals.D * Pc).trace();
  const double d_beta = 0.5 * n * dd / beta - 0.5 * dd * tr_pinv_d -
                        0.5 * totals.A - 0.5 * dd * totals.B +
                        0.5 * dd * tr_kinv_d + beta * quad -
                        0.5 * beta * beta * quad_d;
  out.grad.log_noise_precision = beta * d_beta;
  return out;
}

double assemble_bound(const PartialSums& totals, const InducingInputs& inducing,
                      const KernelParams& params, std::uint64_t n, Index d,
                      const JitterPolicy& jitter) {
  if (totals.count != n) {
    throw InvalidInput("partial sums cover " + std::to_string(totals.count) +
                       " points, expected " + std::to_string(n));
  }
  if (totals.C.cols() != d) throw DimensionError("output dimension mismatch");
  return assemble_global(totals, inducing, params, jitter).value;
}

BoundReport assemble_gradients(const PartialSums& totals,
                               const InducingInputs& inducing,
                               const KernelParams& params,
                               std::span<const Block> blocks,
                               const JitterPolicy& jitter) {
  GlobalStep step = assemble_global(totals, inducing, params, jitter);
  BoundReport report;
  report.value = step.value;
  report.jitter = step.jitter;
  report.grad_global = step.grad;
  report.local.reserve(blocks.size());
  for (const Block& b : blocks) {
    report.local.push_back(
        local_gradients(b.Y, b.latents, inducing, params, step.accum));
    report.grad_global += report.local.back().global;
  }
  report.accum = std::move(step.accum);
  return report;
}

BoundReport evaluate_blocks(std::span<const Block> blocks,
                            const InducingInputs& inducing,
                            const KernelParams& params,
                            const JitterPolicy& jitter) {
  std::vector<PartialSums> parts;
  parts.reserve(blocks.size());
  for (const Block& b : blocks) {
    parts.push_back(local_terms(b.Y, b.latents, inducing, params));
  }
  return assemble_gradients(reduce(parts), inducing, params, blocks, jitter);
}

}  // namespace dgp
