#pragma once

#include <cstdint>
#include <optional>

#include "dgp/bound.hpp"
#include "dgp/params.hpp"

namespace dgp {

/// State held by one worker: its rows of Y, their latent posterior, and the
/// most recent broadcasts from the coordinator.  Used directly by the
/// in-process backends and behind the wire protocol by dgp-worker.
class Worker {
 public:
  // Frozen (regression) rows; set_locals switches the block to latent mode.
  void set_data(Matrix X, Matrix Y);
  void set_locals(Matrix means, Matrix log_variances);
  void set_globals(const Vector& flat, Index m, Index q);
  void set_accumulators(Accumulators accum);

  PartialSums compute_terms() const;
  LocalGradient compute_gradients() const;

  // Alternating mode: `steps` plain gradient-ascent steps of size
  // `step_size` on (mean, log variance), all against the accumulators of the
  // last broadcast.  No-op for frozen rows.
  void local_step(std::uint32_t steps, double step_size);

  const Matrix& Y() const { return Y_; }
  const LatentPosterior& latents() const { return latents_; }
  const Matrix& log_variances() const { return log_variances_; }
  bool has_globals() const { return globals_.has_value(); }

 private:
  const GlobalParams& globals() const;
  const Accumulators& accum() const;

  Matrix Y_;
  LatentPosterior latents_;
  Matrix log_variances_;  // latent mode only
  std::optional<GlobalParams> globals_;
  std::optional<Accumulators> accum_;
};

// Runs the worker side of the wire protocol on the given descriptors until
// SHUTDOWN or end of stream (returns 0).  A malformed or unknown message
// returns nonzero.  Errors while computing are reported to the coordinator
// with an ERROR message.  With `fail_on_compute` the worker exits with
// status 3 on its first COMPUTE_TERMS, for failure-path testing.
int serve(int in_fd, int out_fd, std::uint32_t partition, bool fail_on_compute = false);

}  // namespace dgp
