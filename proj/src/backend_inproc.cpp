// Serial and thread-pool backends.  Both drive one Worker per partition in
// this process; the pool pins partition i to thread i.

#include <chrono>
#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include <time.h>

#include "backend_impl.hpp"
#include "dgp/worker.hpp"

namespace dgp {

double thread_cpu_seconds() {
  timespec ts{};
  if (clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts) != 0) return 0.0;
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

void Backend::check_partitions(Index n, std::span<const Partition> partitions) {
  if (partitions.size() != workers()) {
    throw InvalidInput("backend has " + std::to_string(workers()) + " workers but got " +
                       std::to_string(partitions.size()) + " partitions");
  }
  Index next = 0;
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    const Partition& p = partitions[i];
    if (p.index != i || p.begin != next || p.count < 0) {
      throw InvalidInput("partitions must be ordered, contiguous and disjoint");
    }
    next += p.count;
  }
  if (next != n) throw InvalidInput("partitions do not cover the dataset");
  partitions_.assign(partitions.begin(), partitions.end());
}

void set_locals(Backend& backend, const LatentPosterior& latents) {
  backend.set_locals(latents.means, latents.variances.array().log().matrix());
}

namespace {

using Clock = std::chrono::steady_clock;

class ThreadPool {
 public:
  explicit ThreadPool(std::size_t k) : errors_(k) {
    threads_.reserve(k);
    for (std::size_t i = 0; i < k; ++i) threads_.emplace_back([this, i] { loop(i); });
  }
  ~ThreadPool() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    start_.notify_all();
    for (auto& t : threads_) t.join();
  }

  // Runs task(i) on thread i for every i and waits for all of them.
  std::vector<std::exception_ptr> run(const std::function<void(std::size_t)>& task) {
    std::unique_lock lock(mu_);
    task_ = &task;
    pending_ = threads_.size();
    for (auto& e : errors_) e = nullptr;
    ++generation_;
    start_.notify_all();
    done_.wait(lock, [this] { return pending_ == 0; });
    task_ = nullptr;
    return errors_;
  }

 private:
  void loop(std::size_t i) {
    std::uint64_t seen = 0;
    while (true) {
      const std::function<void(std::size_t)>* task;
      {
        std::unique_lock lock(mu_);
        start_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        task = task_;
      }
      std::exception_ptr err;
      try {
        (*task)(i);
      } catch (...) {
        err = std::current_exception();
      }
      {
        std::lock_guard lock(mu_);
        errors_[i] = err;
        if (--pending_ == 0) done_.notify_one();
      }
    }
  }

  std::vector<std::thread> threads_;
  std::vector<std::exception_ptr> errors_;
  std::mutex mu_;
  std::condition_variable start_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* task_ = nullptr;
  std::size_t pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

class InProcessBackend final : public Backend {
 public:
  InProcessBackend(std::size_t k, bool threaded, std::optional<std::size_t> fail)
      : workers_(k), fail_(fail) {
    if (k < 1) throw InvalidInput("need at least one worker");
    if (threaded) pool_ = std::make_unique<ThreadPool>(k);
  }

  std::string name() const override { return pool_ ? "threads" : "serial"; }
  std::size_t workers() const override { return workers_.size(); }

  void load(const Matrix& Y, const LatentPosterior& latents,
            std::span<const Partition> partitions) override {
    if (latents.size() != Y.rows()) throw DimensionError("latents and Y differ in row count");
    check_partitions(Y.rows(), partitions);
    for (const Partition& p : partitions_) {
      workers_[p.index].set_data(latents.means.middleRows(p.begin, p.count),
                                 Y.middleRows(p.begin, p.count));
    }
  }

  void set_globals(const Vector& flat, Index m, Index q) override {
    for (auto& w : workers_) w.set_globals(flat, m, q);
  }

  void set_locals(const Matrix& means, const Matrix& log_variances) override {
    for (const Partition& p : partitions_) {
      workers_[p.index].set_locals(means.middleRows(p.begin, p.count),
                                   log_variances.middleRows(p.begin, p.count));
    }
  }

  std::vector<PartialSums> compute_terms(std::vector<WorkerTiming>& timings) override {
    std::vector<PartialSums> out(workers_.size());
    run(timings, [&](std::size_t i) {
      if (fail_ && *fail_ == i) throw std::runtime_error("injected failure");
      out[i] = workers_[i].compute_terms();
    });
    return out;
  }

  void set_accumulators(const Accumulators& accum) override {
    for (auto& w : workers_) w.set_accumulators(accum);
  }

  std::vector<LocalGradient> compute_gradients(std::vector<WorkerTiming>& timings) override {
    std::vector<LocalGradient> out(workers_.size());
    run(timings, [&](std::size_t i) { out[i] = workers_[i].compute_gradients(); });
    return out;
  }

  void local_step(std::uint32_t steps, double step_size) override {
    std::vector<WorkerTiming> timings;
    run(timings, [&](std::size_t i) { workers_[i].local_step(steps, step_size); });
  }

  LatentPosterior gather_locals() override {
    return detail::stack_latents(partitions_, [&](std::size_t i) -> const LatentPosterior& {
      return workers_[i].latents();
    });
  }

 private:
  void run(std::vector<WorkerTiming>& timings, const std::function<void(std::size_t)>& task) {
    timings.assign(workers_.size(), {});
    const auto timed = [&](std::size_t i) {
      const auto t0 = Clock::now();
      const double c0 = thread_cpu_seconds();
      task(i);
      timings[i].cpu = thread_cpu_seconds() - c0;
      timings[i].wall = std::chrono::duration<double>(Clock::now() - t0).count();
    };
    std::vector<std::exception_ptr> errors(workers_.size());
    if (pool_) {
      errors = pool_->run(timed);
    } else {
      for (std::size_t i = 0; i < workers_.size(); ++i) {
        try {
          timed(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    }
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (!errors[i]) continue;
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        throw WorkerFailure(i, e.what());
      }
    }
  }

  std::vector<Worker> workers_;
  std::unique_ptr<ThreadPool> pool_;
  std::optional<std::size_t> fail_;
};

}  // namespace

namespace detail {

std::unique_ptr<Backend> make_inprocess_backend(std::size_t k, bool threaded,
                                                std::optional<std::size_t> fail) {
  return std::make_unique<InProcessBackend>(k, threaded, fail);
}

}  // namespace detail

std::vector<Partition> make_partitions(Index n, std::size_t k) {
  if (k < 1 || static_cast<Index>(k) > n) {
    throw InvalidInput("cannot split " + std::to_string(n) + " rows into " +
                       std::to_string(k) + " partitions");
  }
  std::vector<Partition> out(k);
  const Index kk = static_cast<Index>(k);
  const Index base = n / kk;
  const Index extra = n % kk;
  Index begin = 0;
  for (Index i = 0; i < kk; ++i) {
    const Index count = base + (i < extra ? 1 : 0);
    out[static_cast<std::size_t>(i)] = {static_cast<std::size_t>(i), begin, count};
    begin += count;
  }
  return out;
}

std::vector<Partition> make_unbalanced_partitions(Index n, std::size_t k) {
  if (k < 2 || static_cast<Index>(k) - 1 > n / 2) {
    throw InvalidInput("unbalanced layout needs 2 <= k <= n/2 + 1");
  }
  const Index first = n - n / 2;
  auto rest = make_partitions(n - first, k - 1);
  std::vector<Partition> out;
  out.push_back({0, 0, first});
  for (auto p : rest) out.push_back({p.index + 1, p.begin + first, p.count});
  return out;
}

BackendKind parse_backend(const std::string& s) {
  if (s == "serial") return BackendKind::kSerial;
  if (s == "threads") return BackendKind::kThreads;
  if (s == "procs") return BackendKind::kProcs;
  throw InvalidInput("unknown backend '" + s + "'");
}

const char* to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kSerial: return "serial";
    case BackendKind::kThreads: return "threads";
    case BackendKind::kProcs: return "procs";
  }
  return "?";
}

std::unique_ptr<Backend> make_backend(BackendKind kind, std::size_t workers,
                                      const BackendOptions& options) {
  switch (kind) {
    case BackendKind::kSerial:
      return detail::make_inprocess_backend(workers, false, options.fail_partition);
    case BackendKind::kThreads:
      return detail::make_inprocess_backend(workers, true, options.fail_partition);
    case BackendKind::kProcs:
      return detail::make_process_backend(workers, options);
  }
  throw InvalidInput("unknown backend");
}

}  // namespace dgp
