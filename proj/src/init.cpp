#include "dgp/init.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace dgp {

namespace {

// Uniform in [0, 1) straight from the engine bits, so results do not depend
// on the standard library's distribution implementations.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

Matrix kmeans(const Matrix& X, Index k, std::uint64_t seed, int max_iter) {
  const Index n = X.rows();
  if (k < 1 || k > n) {
    throw InvalidInput("k-means needs 1 <= k <= n (k = " + std::to_string(k) +
                       ", n = " + std::to_string(n) + ")");
  }
  if (!X.allFinite()) throw InvalidInput("k-means input contains NaN or Inf");
  std::mt19937_64 rng(seed);

  Matrix centres(k, X.cols());
  Vector d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  centres.row(0) = X.row(static_cast<Index>(uniform01(rng) * static_cast<double>(n)));
  for (Index c = 1; c < k; ++c) {
    for (Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (X.row(i) - centres.row(c - 1)).squaredNorm());
    }
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      double target = uniform01(rng) * total;
      for (pick = 0; pick < n - 1; ++pick) {
        target -= d2[pick];
        if (target < 0.0) break;
      }
    } else {
      pick = static_cast<Index>(uniform01(rng) * static_cast<double>(n));
    }
    centres.row(c) = X.row(pick);
  }

  std::vector<Index> assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      (centres.rowwise() - X.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, X.cols());
    Vector counts = Vector::Zero(k);
    for (Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += X.row(i);
      counts[assign[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (Index c = 0; c < k; ++c) {
      if (counts[c] > 0.0) {
        centres.row(c) = sums.row(c) / counts[c];
      } else {
        // empty cluster: move it to the point farthest from its centre
        Index far = 0;
        double worst = -1.0;
        for (Index i = 0; i < n; ++i) {
          const double dist =
              (X.row(i) - centres.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
          if (dist > worst) {
            worst = dist;
            far = i;
          }
        }
        centres.row(c) = X.row(far);
      }
    }
  }
  return centres;
}

Matrix init_inducing(const Matrix& X, Index m, std::uint64_t seed, double noise_fraction) {
  Matrix Z = kmeans(X, m, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (Index r = 0; r < X.cols(); ++r) {
    const double mean = X.col(r).mean();
    double sd = std::sqrt((X.col(r).array() - mean).square().mean());
    if (!(sd > 0.0)) sd = 1.0;
    for (Index j = 0; j < m; ++j) Z(j, r) += noise_fraction * sd * standard_normal(rng);
  }
  return Z;
}

Matrix PcaProjection::apply(const Matrix& Y) const {
  if (Y.cols() != mean.size()) throw DimensionError("PCA projection expects " +
                                                    std::to_string(mean.size()) + " columns");
  Matrix scores = (Y.rowwise() - mean) * components;
  return scores.array().rowwise() / scale.array();
}

PcaProjection fit_pca(const Matrix& Y, Index q) {
  if (q < 1 || q > Y.cols()) {
    throw InvalidInput("latent dimension q = " + std::to_string(q) + " must be in [1, d = " +
                       std::to_string(Y.cols()) + "]");
  }
  if (Y.rows() < 1) throw InvalidInput("PCA needs at least one row");
  PcaProjection p;
  p.mean = Y.colwise().mean();
  const Matrix centred = Y.rowwise() - p.mean;
  // eigen-decomposition of the d x d covariance; eigenvalues ascending
  const Matrix cov = centred.transpose() * centred / static_cast<double>(Y.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Index d = Y.cols();
  p.components.resize(d, q);
  for (Index c = 0; c < q; ++c) {
    Vector v = eig.eigenvectors().col(d - 1 - c);
    // fix the sign so the largest-magnitude entry is positive
    Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v[big] < 0.0) v = -v;
    p.components.col(c) = v;
  }
  p.scale = RowVector::Ones(q);
  const Matrix scores = centred * p.components;
  for (Index c = 0; c < q; ++c) {
    const double sd = std::sqrt(scores.col(c).squaredNorm() / static_cast<double>(Y.rows()));
    if (sd > 1e-12) p.scale[c] = sd;
  }
  return p;
}

}  // namespace dgp
