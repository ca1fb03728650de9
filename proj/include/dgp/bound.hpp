#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dgp/kernel.hpp"
#include "dgp/linalg.hpp"

namespace dgp {

/// One partition's contribution to the collapsed bound.  Every field is a
/// plain sum over the points of the partition, so partial sums from
/// different workers combine by addition.
struct PartialSums {
  double A = 0.0;   // sum_i Y_i Y_i^T
  double B = 0.0;   // sum_i <K_ii>
  double KL = 0.0;  // sum_i KL(q(X_i) || p(X_i)), zero for observed inputs
  Matrix C;         // m x d, sum_i <K_mi> Y_i
  Matrix D;         // m x m, sum_i <K_mi K_im>
  std::uint64_t count = 0;

  static PartialSums zeros(Index m, Index d);

  PartialSums& operator+=(const PartialSums& other);
};

PartialSums merge(const PartialSums& a, const PartialSums& b);

// Sums in the order given.  Callers pass partitions in ascending index order
// so that repeated runs with the same worker count are bit-identical.
PartialSums reduce(std::span<const PartialSums> parts);

PartialSums local_terms(const Eigen::Ref<const Matrix>& Y,
                        const LatentPosterior& latents,
                        const InducingInputs& inducing,
                        const KernelParams& params);

/// KL(N(mean, diag(variance)) || N(0, I)).  Every variance must be > 0.
double kl_diag_gaussian(const Eigen::Ref<const RowVector>& mean,
                        const Eigen::Ref<const RowVector>& variance);

/// What each worker needs to compute its local gradients once the global
/// sums are known.
struct Accumulators {
  Matrix P_inv;    // (K_mm + beta D)^-1
  Matrix P_inv_C;  // (K_mm + beta D)^-1 C
  Matrix Kmm_inv;  // K_mm^-1
};

/// Derivatives of the bound with respect to the summed statistics,
/// reconstructed from the accumulators on the worker side.
struct StatisticWeights {
  double dB = 0.0;
  Matrix dC;  // m x d
  Matrix dD;  // m x m, symmetric
};

StatisticWeights statistic_weights(const Accumulators& accum,
                                   double noise_precision, Index d);

/// Gradient of the bound with respect to the global parameters, in the same
/// parameterisation the optimizer sees (log scale for positive values).
struct GlobalGradient {
  KernelGradient kernel;
  double log_noise_precision = 0.0;

  static GlobalGradient zeros(Index m, Index q);
  GlobalGradient& operator+=(const GlobalGradient& other);
};

/// A worker's gradient output: its share of the global gradient (the psi
/// statistic terms) and the gradients for its own latent points.
struct LocalGradient {
  GlobalGradient global;
  Matrix d_means;          // n_k x q; empty when frozen
  Matrix d_log_variances;  // n_k x q; empty when frozen
};

LocalGradient local_gradients(const Eigen::Ref<const Matrix>& Y,
                              const LatentPosterior& latents,
                              const InducingInputs& inducing,
                              const KernelParams& params,
                              const Accumulators& accum);

/// Coordinator-side result of assembling the reduced sums: the bound value,
/// the part of the global gradient that depends only on the sums (through
/// K_mm and beta), and the broadcast payload.
struct GlobalStep {
  double value = 0.0;
  GlobalGradient grad;
  Accumulators accum;
  double jitter = 0.0;
};

GlobalStep assemble_global(const PartialSums& totals,
                           const InducingInputs& inducing,
                           const KernelParams& params,
                           const JitterPolicy& jitter = {});

double assemble_bound(const PartialSums& totals, const InducingInputs& inducing,
                      const KernelParams& params, std::uint64_t n, Index d,
                      const JitterPolicy& jitter = {});

/// Data for one partition, as seen by the single-process reference path.
struct Block {
  Matrix Y;
  LatentPosterior latents;
};

struct BoundReport {
  double value = 0.0;
  GlobalGradient grad_global;
  Accumulators accum;
  std::vector<LocalGradient> local;  // one per block, in block order
  double jitter = 0.0;
};

// Single-process assembly: the bound and global gradient from reduced
// totals, plus the second pass of local_gradients over `blocks` (which must
// be the blocks the totals were computed from).
BoundReport assemble_gradients(const PartialSums& totals,
                               const InducingInputs& inducing,
                               const KernelParams& params,
                               std::span<const Block> blocks,
                               const JitterPolicy& jitter = {});

// local_terms over every block, reduced in block order, then
// assemble_gradients.
BoundReport evaluate_blocks(std::span<const Block> blocks,
                            const InducingInputs& inducing,
                            const KernelParams& params,
                            const JitterPolicy& jitter = {});

}  // namespace dgp
