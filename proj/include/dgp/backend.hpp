#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dgp/bound.hpp"
#include "dgp/params.hpp"

namespace dgp {

/// A contiguous block of rows [begin, begin + count) owned by one worker.
struct Partition {
  std::size_t index = 0;
  Index begin = 0;
  Index count = 0;
};

// Balanced contiguous partitions: sizes differ by at most one, larger ones
// first.  Requires 1 <= k <= n.
std::vector<Partition> make_partitions(Index n, std::size_t k);

// Debug layout for load-balance checks: the first partition takes half of
// the rows, the rest are split evenly.  Requires 2 <= k and k - 1 <= n / 2.
std::vector<Partition> make_unbalanced_partitions(Index n, std::size_t k);

struct WorkerTiming {
  double wall = 0.0;  // seconds
  double cpu = 0.0;   // thread CPU seconds; 0 where not measurable
};

/// Where the map steps run.  Every method that talks to workers throws
/// WorkerFailure naming the lowest failed partition; results of a failed
/// call are never partially used.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string name() const = 0;
  virtual std::size_t workers() const = 0;

  // Hands each worker its rows.  partitions.size() must equal workers().
  // In latent mode the latent means travel in place of X and set_locals
  // must follow before the first compute.
  virtual void load(const Matrix& Y, const LatentPosterior& latents,
                    std::span<const Partition> partitions) = 0;
  // Flattened G (see GlobalParams).  Every backend unflattens the same bits
  // the same way, so equal partition counts give bit-identical results.
  virtual void set_globals(const Vector& flat, Index m, Index q) = 0;
  // Full n x q latent means and log variances; each worker takes its rows.
  virtual void set_locals(const Matrix& means, const Matrix& log_variances) = 0;
  virtual std::vector<PartialSums> compute_terms(std::vector<WorkerTiming>& timings) = 0;
  virtual void set_accumulators(const Accumulators& accum) = 0;
  virtual std::vector<LocalGradient> compute_gradients(
      std::vector<WorkerTiming>& timings) = 0;
  virtual void local_step(std::uint32_t steps, double step_size) = 0;
  // Current latent posterior assembled from every worker, in row order.
  virtual LatentPosterior gather_locals() = 0;

  const std::vector<Partition>& partitions() const { return partitions_; }

 protected:
  void check_partitions(Index n, std::span<const Partition> partitions);

  std::vector<Partition> partitions_;
};

void set_locals(Backend& backend, const LatentPosterior& latents);

enum class BackendKind { kSerial, kThreads, kProcs };

BackendKind parse_backend(const std::string& s);
const char* to_string(BackendKind kind);

struct BackendOptions {
  // procs: worker executable; empty means $DGP_WORKER, then dgp-worker next
  // to the running executable, then the build-tree default.
  std::string worker_path;
  // Test hook: the worker for this partition dies on its first map step.
  std::optional<std::size_t> fail_partition;
};

std::unique_ptr<Backend> make_backend(BackendKind kind, std::size_t workers,
                                      const BackendOptions& options = {});

// Thread CPU time of the calling thread in seconds.
double thread_cpu_seconds();

}  // namespace dgp
