#pragma once

#include "dgp/bound.hpp"

namespace dgp {

// Upper bound on the noise precision.  Fits with (near-)noiseless targets
// otherwise drive beta to infinity and K_mm + beta D out of range.
inline constexpr double kMaxNoisePrecision = 1e6;

/// The global parameters G shared by every worker.
///
/// Flattened layout, length m*q + q + 2:
///   Z (row-major), log ard_weights, log signal_variance, log noise_precision
struct GlobalParams {
  InducingInputs inducing;
  KernelParams kernel;

  Index m() const { return inducing.size(); }
  Index q() const { return inducing.dim(); }

  static Index flat_size(Index m, Index q) { return m * q + q + 2; }

  Vector flatten() const;
  // Noise precisions above kMaxNoisePrecision are clamped to it.
  static GlobalParams unflatten(const Eigen::Ref<const Vector>& flat, Index m,
                                Index q);

  void validate() const;
};

// Same layout as GlobalParams::flatten.
Vector flatten_gradient(const GlobalGradient& grad);

// Whether the log noise precision in `flat` lies beyond the cap, in which
// case the bound is flat in that coordinate.
bool noise_capped(const Eigen::Ref<const Vector>& flat);

}  // namespace dgp
