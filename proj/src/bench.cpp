#include "dgp/bench.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <sys/utsname.h>

#include "dgp/data.hpp"
#include "dgp/engine.hpp"

namespace dgp {

namespace {

struct Fixture {
  Matrix Y;
  LatentPosterior latents;
  Matrix log_vars;
  GlobalParams globals;
};

// Deterministic in (n, seed).  The inducing inputs sit on a fixed grid with
// a lengthscale near the grid spacing, so K_mm stays well conditioned and F
// agrees across worker counts to rounding.
Fixture make_fixture(const BenchWorkload& w) {
  if (w.n < 1 || w.m < 1 || w.q < 1) throw InvalidInput("bench workload needs n, m, q >= 1");
  const Dataset ds = synth_latent_1d(static_cast<std::size_t>(w.n), w.seed, 0.05);
  Fixture f;
  f.Y = ds.Y;
  Matrix means(w.n, w.q);
  means.col(0) = ds.X.col(0);
  std::mt19937_64 rng(w.seed ^ 0xb5ad4eceda1ce2a9ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < w.n; ++i) {
    for (Index r = 1; r < w.q; ++r) means(i, r) = normal(rng);
  }
  if (w.latent) {
    f.log_vars = Matrix::Constant(w.n, w.q, std::log(0.1));
    f.latents = LatentPosterior::latent(means, f.log_vars.array().exp().matrix());
  } else {
    f.latents = LatentPosterior::observed(means);
  }
  Index side = 1;
  while (std::pow(static_cast<double>(side), static_cast<double>(w.q)) < static_cast<double>(w.m)) {
    ++side;
  }
  const double spacing = side > 1 ? 4.0 / static_cast<double>(side - 1) : 1.0;
  Matrix Z(w.m, w.q);
  for (Index j = 0; j < w.m; ++j) {
    Index rest = j;
    for (Index r = 0; r < w.q; ++r) {
      Z(j, r) = side > 1 ? -2.0 + spacing * static_cast<double>(rest % side) : 0.0;
      rest /= side;
    }
  }
  f.globals.inducing = InducingInputs(Z);
  f.globals.kernel.signal_variance = 1.0;
  f.globals.kernel.ard_weights = Vector::Constant(w.q, 1.0 / (spacing * spacing));
  f.globals.kernel.noise_precision = 100.0;
  return f;
}

IterationSample sample_of(const IterationTimings& t) {
  IterationSample s;
  s.wall = t.total;
  s.global = t.reduce + t.global;
  const std::size_t k = t.map_wall.size();
  const bool have_cpu = std::all_of(t.map_cpu.begin(), t.map_cpu.end(),
                                    [](double c) { return c > 0.0; });
  std::vector<double> per(k);
  for (std::size_t i = 0; i < k; ++i) {
    s.map_wall = std::max(s.map_wall, t.map_wall[i] + t.grad_wall[i]);
    per[i] = have_cpu ? t.map_cpu[i] + t.grad_cpu[i] : t.map_wall[i] + t.grad_wall[i];
  }
  if (k > 0) {
    s.worker_min = *std::min_element(per.begin(), per.end());
    s.worker_max = *std::max_element(per.begin(), per.end());
    s.worker_mean = std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(k);
  }
  return s;
}

BenchRow run_row(const Fixture& f, std::size_t workers, const BenchConfig& config) {
  if (config.iters < 1) throw InvalidInput("bench needs at least one timed iteration");
  const Index n = f.Y.rows();
  auto backend = make_backend(config.backend, workers, config.backend_options);
  const auto parts = config.unbalanced && workers >= 2
                         ? make_unbalanced_partitions(n, workers)
                         : make_partitions(n, workers);
  backend->load(f.Y, f.latents, parts);
  if (!f.latents.frozen) backend->set_locals(f.latents.means, f.log_vars);
  const Vector flat = f.globals.flatten();
  const Index m = f.globals.m();
  const Index q = f.globals.q();

  BenchRow row;
  row.n = n;
  row.workers = workers;
  row.oversubscribed = workers > std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t i = 0; i < config.warmup + config.iters; ++i) {
    const Evaluation e = run_iteration(*backend, flat, m, q, config.jitter);
    row.bound = e.report.value;
    if (i >= config.warmup) row.samples.push_back(sample_of(e.timings));
  }
  auto med = [&](auto get) {
    std::vector<double> v;
    for (const auto& s : row.samples) v.push_back(get(s));
    return median(std::move(v));
  };
  row.median_wall = med([](const IterationSample& s) { return s.wall; });
  row.median_map = med([](const IterationSample& s) { return s.map_wall; });
  row.median_global = med([](const IterationSample& s) { return s.global; });
  row.median_worker_min = med([](const IterationSample& s) { return s.worker_min; });
  row.median_worker_mean = med([](const IterationSample& s) { return s.worker_mean; });
  row.median_worker_max = med([](const IterationSample& s) { return s.worker_max; });
  row.median_imbalance = med([](const IterationSample& s) { return s.imbalance(); });
  return row;
}

ScalingReport start_report(const char* kind, const BenchWorkload& w, const BenchConfig& c) {
  ScalingReport r;
  r.kind = kind;
  r.machine = machine_descriptor();
  r.config = {{"kind", kind},
              {"backend", to_string(c.backend)},
              {"n", std::to_string(w.n)},
              {"m", std::to_string(w.m)},
              {"q", std::to_string(w.q)},
              {"latent", w.latent ? "1" : "0"},
              {"seed", std::to_string(w.seed)},
              {"iters", std::to_string(c.iters)},
              {"warmup", std::to_string(c.warmup)},
              {"unbalanced", c.unbalanced ? "1" : "0"}};
  return r;
}

std::string join(std::span<const std::size_t> v) {
  std::string s;
  for (std::size_t x : v) s += (s.empty() ? "" : " ") + std::to_string(x);
  return s;
}

}  // namespace

double IterationSample::imbalance() const {
  return worker_mean > 0.0 ? (worker_max - worker_min) / worker_mean : 0.0;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  const double hi = values[mid];
  if (values.size() % 2) return hi;
  const double lo = *std::max_element(values.begin(),
                                      values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

std::string machine_descriptor() {
  std::string cpu = "unknown cpu";
  std::ifstream info("/proc/cpuinfo");
  for (std::string line; std::getline(info, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  utsname u{};
  const std::string os = ::uname(&u) == 0 ? fmt::format("{} {}", u.sysname, u.machine) : "?";
  return fmt::format("{}; {} hardware threads; {}", cpu, std::thread::hardware_concurrency(),
                     os);
}

ScalingReport bench_strong(const BenchWorkload& workload,
                           std::span<const std::size_t> worker_counts,
                           const BenchConfig& config) {
  if (worker_counts.empty()) throw InvalidInput("no worker counts given");
  ScalingReport r = start_report("strong", workload, config);
  r.config.emplace_back("workers", join(worker_counts));
  const Fixture f = make_fixture(workload);
  for (std::size_t k : worker_counts) r.rows.push_back(run_row(f, k, config));
  for (auto& row : r.rows) row.speedup = r.rows.front().median_wall / row.median_wall;
  return r;
}

ScalingReport bench_weak(const BenchWorkload& base, std::size_t base_workers,
                         std::span<const std::size_t> scale_factors,
                         const BenchConfig& config) {
  if (scale_factors.empty()) throw InvalidInput("no scale factors given");
  ScalingReport r = start_report("weak", base, config);
  r.config.emplace_back("base_workers", std::to_string(base_workers));
  r.config.emplace_back("scales", join(scale_factors));
  for (std::size_t s : scale_factors) {
    BenchWorkload w = base;
    w.n = base.n * static_cast<Index>(s);
    r.rows.push_back(run_row(make_fixture(w), base_workers * s, config));
  }
  for (auto& row : r.rows) row.speedup = r.rows.front().median_wall / row.median_wall;
  return r;
}

ScalingReport bench_load(const BenchWorkload& workload, std::size_t workers,
                         const BenchConfig& config) {
  ScalingReport r = start_report("load", workload, config);
  r.config.emplace_back("workers", std::to_string(workers));
  r.rows.push_back(run_row(make_fixture(workload), workers, config));
  return r;
}

ScalingReport bench_global(const BenchWorkload& base, std::span<const Index> sizes,
                           std::size_t workers, const BenchConfig& config) {
  if (sizes.empty()) throw InvalidInput("no dataset sizes given");
  ScalingReport r = start_report("global", base, config);
  std::string s;
  for (Index n : sizes) s += (s.empty() ? "" : " ") + std::to_string(n);
  r.config.emplace_back("sizes", s);
  r.config.emplace_back("workers", std::to_string(workers));
  for (Index n : sizes) {
    BenchWorkload w = base;
    w.n = n;
    r.rows.push_back(run_row(make_fixture(w), workers, config));
  }
  return r;
}

void write_table(std::ostream& out, const ScalingReport& report) {
  fmt::print(out, "{} scaling on {}\n", report.kind, report.machine);
  fmt::print(out, "{:>9} {:>7} {:>11} {:>11} {:>11} {:>9} {:>9} {:>9} {:>9} {:>8} {:>16}\n", "n",
             "workers", "iter_s", "map_s", "global_s", "wk_min", "wk_mean", "wk_max", "imbal",
             "speedup", "F");
  for (const auto& row : report.rows) {
    fmt::print(out,
               "{:>9} {:>7} {:>11.5f} {:>11.5f} {:>11.6f} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} "
               "{:>8.3f} {:>16.6f}{}\n",
               row.n, row.workers, row.median_wall, row.median_map, row.median_global,
               row.median_worker_min, row.median_worker_mean, row.median_worker_max,
               row.median_imbalance, row.speedup, row.bound,
               row.oversubscribed ? "  (oversubscribed)" : "");
  }
}

void write_csv(std::ostream& out, const ScalingReport& report) {
  fmt::print(out, "# machine: {}\n", report.machine);
  for (const auto& [k, v] : report.config) fmt::print(out, "# {}: {}\n", k, v);
  out << "kind,n,workers,median_iter_s,median_map_s,median_global_s,median_worker_min_s,"
         "median_worker_mean_s,median_worker_max_s,median_imbalance,speedup,bound,"
         "oversubscribed\n";
  for (const auto& row : report.rows) {
    fmt::print(out, "{},{},{},{},{},{},{},{},{},{},{},{},{}\n", report.kind, row.n,
               row.workers, row.median_wall, row.median_map, row.median_global,
               row.median_worker_min, row.median_worker_mean, row.median_worker_max,
               row.median_imbalance, row.speedup, row.bound, row.oversubscribed ? 1 : 0);
  }
}

void write_samples_csv(std::ostream& out, const ScalingReport& report) {
  fmt::print(out, "# machine: {}\n", report.machine);
  for (const auto& [k, v] : report.config) fmt::print(out, "# {}: {}\n", k, v);
  out << "kind,n,workers,iteration,iter_s,map_s,global_s,worker_min_s,worker_mean_s,"
         "worker_max_s,imbalance\n";
  for (const auto& row : report.rows) {
    for (std::size_t i = 0; i < row.samples.size(); ++i) {
      const auto& s = row.samples[i];
      fmt::print(out, "{},{},{},{},{},{},{},{},{},{},{}\n", report.kind, row.n, row.workers, i,
                 s.wall, s.map_wall, s.global, s.worker_min, s.worker_mean, s.worker_max,
                 s.imbalance());
    }
  }
}

}  // namespace dgp
