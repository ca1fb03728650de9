#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dgp/backend.hpp"
#include "dgp/optim.hpp"

namespace dgp {

struct IterationTimings {
  std::vector<double> map_wall;  // per worker, partial-sums pass
  std::vector<double> map_cpu;
  std::vector<double> grad_wall;  // per worker, gradient pass
  std::vector<double> grad_cpu;
  double reduce = 0.0;  // summing the partial sums
  double global = 0.0;  // assembling F, its global gradient and the accumulators
  double total = 0.0;
};

struct Evaluation {
  BoundReport report;
  IterationTimings timings;
};

// One bound evaluation over a loaded backend: broadcast G, map the partial
// sums, reduce in partition order, assemble F and the accumulators,
// broadcast them, and gather the gradient shares.  Latent locals must
// already be on the workers.
Evaluation run_iteration(Backend& backend, const Vector& flat_globals, Index m,
                         Index q, const JitterPolicy& jitter = {});
Evaluation run_iteration(Backend& backend, const GlobalParams& globals,
                         const JitterPolicy& jitter = {});

enum class TrainMode {
  kJoint,        // one optimizer over [G, means, log variances]
  kAlternating,  // optimizer on G, then worker-side gradient steps on locals
};

TrainMode parse_train_mode(const std::string& s);
const char* to_string(TrainMode mode);

struct TrainConfig {
  Method method = Method::kLbfgs;
  OptimizerConfig optim;
  TrainMode mode = TrainMode::kJoint;
  // alternating mode
  std::size_t global_evals = 10;  // optimizer evaluations on G per round
  std::uint32_t local_steps = 5;
  double local_step_size = 0.01;
  std::size_t max_rounds = 0;  // 0: until max_evals
  JitterPolicy jitter;
};

struct TrainResult {
  GlobalParams globals;
  LatentPosterior latents;
  double value = 0.0;            // F at the returned parameters
  std::vector<double> trace;     // F at every evaluation
  std::vector<double> accepted;  // F after every accepted step
  std::size_t evals = 0;
  StopReason reason = StopReason::kMaxEvals;
  bool flagged = false;
};

// Maximizes F from (globals, latents) on a backend already loaded with the
// data.  Frozen latents are left untouched.
TrainResult optimize(Backend& backend, const GlobalParams& globals,
                     const LatentPosterior& latents, const TrainConfig& config);

// Flattened joint vector [G, means row-major, log variances row-major] and
// back; the latent blocks are absent when `latents.frozen`.
Vector pack_joint(const GlobalParams& globals, const LatentPosterior& latents);
void unpack_joint(const Vector& x, Index m, Index q, GlobalParams& globals,
                  LatentPosterior& latents);

}  // namespace dgp
