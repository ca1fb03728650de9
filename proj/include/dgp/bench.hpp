#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dgp/backend.hpp"
#include "dgp/linalg.hpp"

namespace dgp {

/// Synthetic bound-evaluation workload at fixed parameters.  Latent mode
/// evaluates the psi statistics, which makes the map step dominate.
struct BenchWorkload {
  Index n = 50000;
  Index m = 100;
  Index q = 2;
  bool latent = true;
  std::uint64_t seed = 1;
};

struct BenchConfig {
  BackendKind backend = BackendKind::kThreads;
  BackendOptions backend_options;
  std::size_t iters = 10;
  std::size_t warmup = 2;
  bool unbalanced = false;  // debug: first worker takes half the rows
  JitterPolicy jitter;
};

// One timed evaluation.  Per-worker map time is thread CPU time where the
// backend measures it, wall time otherwise.
struct IterationSample {
  double wall = 0.0;
  double map_wall = 0.0;  // slowest worker, both passes
  double global = 0.0;    // reduce + assemble
  double worker_min = 0.0;
  double worker_mean = 0.0;
  double worker_max = 0.0;
  double imbalance() const;  // (max - min) / mean, 0 for an idle mean
};

struct BenchRow {
  Index n = 0;
  std::size_t workers = 0;
  double median_wall = 0.0;
  double median_map = 0.0;
  double median_global = 0.0;
  double median_worker_min = 0.0;
  double median_worker_mean = 0.0;
  double median_worker_max = 0.0;
  double median_imbalance = 0.0;
  // strong: first row's time / this row's; weak: first row's / this row's
  // (1 is perfect); load and global: 1
  double speedup = 1.0;
  double bound = 0.0;
  bool oversubscribed = false;
  std::vector<IterationSample> samples;
};

struct ScalingReport {
  std::string kind;  // strong, weak, load, global
  std::string machine;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<BenchRow> rows;
};

std::string machine_descriptor();

ScalingReport bench_strong(const BenchWorkload& workload,
                           std::span<const std::size_t> worker_counts,
                           const BenchConfig& config);
// n and the worker count grow together by each factor.
ScalingReport bench_weak(const BenchWorkload& base, std::size_t base_workers,
                         std::span<const std::size_t> scale_factors,
                         const BenchConfig& config);
ScalingReport bench_load(const BenchWorkload& workload, std::size_t workers,
                         const BenchConfig& config);
// Reduce + assemble time across dataset sizes at fixed m and workers.
ScalingReport bench_global(const BenchWorkload& base, std::span<const Index> sizes,
                           std::size_t workers, const BenchConfig& config);

void write_table(std::ostream& out, const ScalingReport& report);
// Header comment lines echo the configuration, then one row per BenchRow.
void write_csv(std::ostream& out, const ScalingReport& report);
// One row per (BenchRow, iteration), for plotting per-iteration spreads.
void write_samples_csv(std::ostream& out, const ScalingReport& report);

double median(std::vector<double> values);

}  // namespace dgp
