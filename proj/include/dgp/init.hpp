#pragma once

#include <cstdint>

#include "dgp/kernel.hpp"

namespace dgp {

// Seeded k-means++ seeding followed by Lloyd iterations.  Returns k x q
// centres.  Requires 1 <= k <= rows.
Matrix kmeans(const Matrix& X, Index k, std::uint64_t seed, int max_iter = 100);

// k-means centres plus Gaussian noise with per-dimension standard deviation
// `noise_fraction` times the data's.  The noise also separates centres
// that coincide when X has fewer than k distinct rows.
Matrix init_inducing(const Matrix& X, Index m, std::uint64_t seed,
                     double noise_fraction = 0.01);

/// Linear map from outputs to the first q principal-component scores,
/// scaled to unit variance over the training rows.
struct PcaProjection {
  RowVector mean;     // 1 x d
  Matrix components;  // d x q, orthonormal columns
  RowVector scale;    // 1 x q, score standard deviations (1 where zero)

  Index dim() const { return components.cols(); }
  Matrix apply(const Matrix& Y) const;
};

PcaProjection fit_pca(const Matrix& Y, Index q);

}  // namespace dgp
