// Out-of-process backend: one spawned dgp-worker per partition, each talking
// the wire protocol over a socketpair mapped to its stdin/stdout.

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>

#include "backend_impl.hpp"
#include "dgp/data.hpp"
#include "dgp/wire.hpp"

extern char** environ;

#ifndef DGP_WORKER_DEFAULT_PATH
#define DGP_WORKER_DEFAULT_PATH "dgp-worker"
#endif

namespace dgp {

namespace {

using Clock = std::chrono::steady_clock;
using wire::Tag;

std::string resolve_worker(const std::string& explicit_path) {
  if (!explicit_path.empty()) return explicit_path;
  if (const char* env = std::getenv("DGP_WORKER"); env && *env) return env;
  std::error_code ec;
  const auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    const auto sibling = self.parent_path() / "dgp-worker";
    if (::access(sibling.c_str(), X_OK) == 0) return sibling.string();
  }
  return DGP_WORKER_DEFAULT_PATH;
}

std::string describe_status(int status) {
  if (WIFEXITED(status)) return "exited with status " + std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return "killed by signal " + std::to_string(WTERMSIG(status));
  return "stopped";
}

class ProcessBackend final : public Backend {
 public:
  ProcessBackend(std::size_t k, const BackendOptions& options) {
    if (k < 1) throw InvalidInput("need at least one worker");
    const std::string path = resolve_worker(options.worker_path);
    children_.resize(k);
    try {
      for (std::size_t i = 0; i < k; ++i) {
        spawn(i, path, options.fail_partition && *options.fail_partition == i);
      }
      std::vector<WorkerTiming> timings;
      const auto hellos = collect(Tag::kHello, timings);
      for (std::size_t i = 0; i < k; ++i) {
        if (wire::decode_hello(hellos[i]) != i) {
          throw WorkerFailure(i, "announced the wrong partition");
        }
      }
    } catch (...) {
      shutdown();
      throw;
    }
  }

  ~ProcessBackend() override { shutdown(); }

  std::string name() const override { return "procs"; }
  std::size_t workers() const override { return children_.size(); }

  void load(const Matrix& Y, const LatentPosterior& latents,
            std::span<const Partition> partitions) override {
    if (latents.size() != Y.rows()) throw DimensionError("latents and Y differ in row count");
    check_partitions(Y.rows(), partitions);
    blocks_.clear();
    d_ = Y.cols();
    q_ = latents.dim();
    for (const Partition& p : partitions_) {
      blocks_.push_back(LatentPosterior::observed(latents.means.middleRows(p.begin, p.count)));
      send(p.index, Tag::kSetData,
           encode_dataset(latents.means.middleRows(p.begin, p.count),
                          Y.middleRows(p.begin, p.count)));
    }
  }

  void set_globals(const Vector& flat, Index m, Index q) override {
    if (flat.size() != GlobalParams::flat_size(m, q) || q != q_) {
      throw DimensionError("globals do not match the loaded data");
    }
    m_ = m;
    const auto payload = wire::encode_vector(flat);
    for (std::size_t i = 0; i < children_.size(); ++i) send(i, Tag::kSetGlobals, payload);
  }

  void set_locals(const Matrix& means, const Matrix& log_variances) override {
    for (const Partition& p : partitions_) {
      blocks_[p.index] = LatentPosterior::latent(
          means.middleRows(p.begin, p.count),
          log_variances.middleRows(p.begin, p.count).array().exp().matrix());
      send(p.index, Tag::kSetLocals,
           wire::encode_locals(means.middleRows(p.begin, p.count),
                               log_variances.middleRows(p.begin, p.count)));
    }
  }

  std::vector<PartialSums> compute_terms(std::vector<WorkerTiming>& timings) override {
    broadcast(Tag::kComputeTerms);
    const auto replies = collect(Tag::kTermsResult, timings);
    std::vector<PartialSums> out;
    for (std::size_t i = 0; i < replies.size(); ++i) {
      out.push_back(decode_or_fail(i, [&] { return wire::decode_terms(replies[i], m_, d_); }));
    }
    return out;
  }

  void set_accumulators(const Accumulators& accum) override {
    const auto payload = wire::encode_accum(accum);
    for (std::size_t i = 0; i < children_.size(); ++i) send(i, Tag::kSetAccum, payload);
  }

  std::vector<LocalGradient> compute_gradients(std::vector<WorkerTiming>& timings) override {
    broadcast(Tag::kComputeGrads);
    const auto replies = collect(Tag::kGradResult, timings);
    std::vector<LocalGradient> out;
    for (const Partition& p : partitions_) {
      const bool latent = !blocks_[p.index].frozen;
      out.push_back(decode_or_fail(p.index, [&] {
        return wire::decode_gradient(replies[p.index], m_, q_, p.count, latent);
      }));
    }
    return out;
  }

  void local_step(std::uint32_t steps, double step_size) override {
    const auto payload = wire::encode_local_step(steps, step_size);
    for (std::size_t i = 0; i < children_.size(); ++i) send(i, Tag::kLocalStep, payload);
    std::vector<WorkerTiming> timings;
    const auto replies = collect(Tag::kLocalResult, timings);
    for (const Partition& p : partitions_) {
      auto [means, log_vars] = decode_or_fail(
          p.index, [&] { return wire::decode_locals(replies[p.index], p.count, q_); });
      if (blocks_[p.index].frozen) continue;
      blocks_[p.index] = LatentPosterior::latent(std::move(means),
                                                 log_vars.array().exp().matrix());
    }
  }

  LatentPosterior gather_locals() override {
    return detail::stack_latents(partitions_, [&](std::size_t i) -> const LatentPosterior& {
      return blocks_[i];
    });
  }

 private:
  struct Child {
    pid_t pid = -1;
    int fd = -1;
    wire::FrameReader reader;
  };

  void spawn(std::size_t i, const std::string& path, bool fail) {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
      throw WorkerFailure(i, std::string("socketpair: ") + std::strerror(errno));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, sv[1], 0);
    posix_spawn_file_actions_adddup2(&actions, sv[1], 1);

    std::vector<std::string> env_store;
    for (char** e = environ; *e; ++e) {
      if (std::strncmp(*e, "DGP_WORKER_FAIL=", 16) != 0) env_store.emplace_back(*e);
    }
    if (fail) env_store.emplace_back("DGP_WORKER_FAIL=1");
    std::vector<char*> envp;
    for (auto& s : env_store) envp.push_back(s.data());
    envp.push_back(nullptr);

    std::string index = std::to_string(i);
    std::string flag = "--partition";
    std::string prog = path;
    char* argv[] = {prog.data(), flag.data(), index.data(), nullptr};
    pid_t pid = -1;
    const int rc = ::posix_spawn(&pid, path.c_str(), &actions, nullptr, argv, envp.data());
    posix_spawn_file_actions_destroy(&actions);
    ::close(sv[1]);
    if (rc != 0) {
      ::close(sv[0]);
      throw WorkerFailure(i, "cannot start '" + path + "': " + std::strerror(rc));
    }
    children_[i].pid = pid;
    children_[i].fd = sv[0];
  }

  void ensure_usable() const {
    if (broken_) throw WorkerFailure(*broken_, "backend is unusable after an earlier failure");
  }

  void send(std::size_t i, Tag tag, std::span<const std::uint8_t> payload) {
    ensure_usable();
    try {
      wire::write_message(children_[i].fd, tag, payload);
    } catch (const ProtocolError& e) {
      broken_ = i;
      throw WorkerFailure(i, e.what());
    }
  }

  void broadcast(Tag tag) {
    for (std::size_t i = 0; i < children_.size(); ++i) send(i, tag, {});
  }

  // Waits for one reply from every worker.  All replies are drained before
  // any failure is raised so that the streams stay in step.
  std::vector<std::vector<std::uint8_t>> collect(Tag expected,
                                                 std::vector<WorkerTiming>& timings) {
    ensure_usable();
    const std::size_t k = children_.size();
    std::vector<std::vector<std::uint8_t>> out(k);
    std::vector<bool> done(k, false);
    std::vector<std::string> errors(k);
    bool dead = false;
    timings.assign(k, {});
    const auto t0 = Clock::now();
    std::size_t remaining = k;
    std::vector<std::uint8_t> buf(1 << 16);

    auto finish = [&](std::size_t i, std::string err) {
      done[i] = true;
      --remaining;
      errors[i] = std::move(err);
      timings[i].wall = std::chrono::duration<double>(Clock::now() - t0).count();
    };
    auto drain = [&](std::size_t i) {
      while (!done[i]) {
        auto msg = children_[i].reader.next();
        if (!msg) return;
        if (msg->tag == Tag::kError) {
          finish(i, std::string(msg->payload.begin(), msg->payload.end()));
        } else if (msg->tag != expected) {
          dead = true;
          finish(i, "unexpected reply tag " + std::to_string(static_cast<int>(msg->tag)));
        } else {
          out[i] = std::move(msg->payload);
          finish(i, {});
        }
      }
    };

    while (remaining > 0) {
      std::vector<pollfd> fds;
      std::vector<std::size_t> who;
      for (std::size_t i = 0; i < k; ++i) {
        if (done[i]) continue;
        fds.push_back({children_[i].fd, POLLIN, 0});
        who.push_back(i);
      }
      if (::poll(fds.data(), fds.size(), -1) < 0) {
        if (errno == EINTR) continue;
        throw std::runtime_error(std::string("poll: ") + std::strerror(errno));
      }
      for (std::size_t j = 0; j < fds.size(); ++j) {
        if (fds[j].revents == 0) continue;
        const std::size_t i = who[j];
        const ssize_t r = ::read(children_[i].fd, buf.data(), buf.size());
        if (r < 0 && errno == EINTR) continue;
        if (r <= 0) {
          dead = true;
          finish(i, exit_reason(i));
          continue;
        }
        try {
          children_[i].reader.feed({buf.data(), static_cast<std::size_t>(r)});
          drain(i);
        } catch (const ProtocolError& e) {
          dead = true;
          finish(i, e.what());
        }
      }
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (errors[i].empty()) continue;
      if (dead) broken_ = i;
      throw WorkerFailure(i, errors[i]);
    }
    return out;
  }

  template <typename F>
  auto decode_or_fail(std::size_t i, F&& decode) -> decltype(decode()) {
    try {
      return decode();
    } catch (const std::exception& e) {
      broken_ = i;
      throw WorkerFailure(i, e.what());
    }
  }

  std::string exit_reason(std::size_t i) {
    Child& c = children_[i];
    if (c.pid <= 0) return "connection closed";
    int status = 0;
    if (::waitpid(c.pid, &status, 0) == c.pid) {
      c.pid = -1;
      return "connection closed; worker " + describe_status(status);
    }
    return "connection closed";
  }

  void shutdown() noexcept {
    for (auto& c : children_) {
      if (c.fd >= 0) {
        try {
          wire::write_message(c.fd, Tag::kShutdown, {});
        } catch (...) {
        }
        ::close(c.fd);
        c.fd = -1;
      }
    }
    for (auto& c : children_) {
      if (c.pid > 0) {
        int status;
        ::waitpid(c.pid, &status, 0);
        c.pid = -1;
      }
    }
  }

  std::vector<Child> children_;
  std::vector<LatentPosterior> blocks_;
  Index m_ = 0;
  Index q_ = 0;
  Index d_ = 0;
  std::optional<std::size_t> broken_;
};

}  // namespace

namespace detail {

std::unique_ptr<Backend> make_process_backend(std::size_t k, const BackendOptions& options) {
  return std::make_unique<ProcessBackend>(k, options);
}

}  // namespace detail

}  // namespace dgp
