#include "dgp/engine.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace dgp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void split_timings(const std::vector<WorkerTiming>& t, std::vector<double>& wall,
                   std::vector<double>& cpu) {
  wall.clear();
  cpu.clear();
  for (const auto& w : t) {
    wall.push_back(w.wall);
    cpu.push_back(w.cpu);
  }
}

// Log variances far outside this range under- or overflow exp().
constexpr double kLogVarLimit = 700.0;

// Hyperparameters whose exp() leaves (0, inf) cannot form a kernel; the
// optimizer treats such trial points as overshoots.
bool representable(const Vector& flat, Index q) {
  if (!flat.allFinite()) return false;
  // std::exp, not Eigen's vectorized exp, which clamps instead of underflowing.
  const Index base = flat.size() - q - 2;
  for (Index i = 0; i < q + 2; ++i) {
    const double v = std::exp(flat[base + i]);
    if (!std::isfinite(v) || (i >= q && !(v > 0.0))) return false;
  }
  return true;
}

}  // namespace

Evaluation run_iteration(Backend& backend, const Vector& flat, Index m, Index q,
                         const JitterPolicy& jitter) {
  const auto t_start = Clock::now();
  const GlobalParams globals = GlobalParams::unflatten(flat, m, q);
  Evaluation ev;
  std::vector<WorkerTiming> timing;

  backend.set_globals(flat, m, q);
  const std::vector<PartialSums> parts = backend.compute_terms(timing);
  split_timings(timing, ev.timings.map_wall, ev.timings.map_cpu);

  auto t0 = Clock::now();
  const PartialSums totals = reduce(parts);
  ev.timings.reduce = seconds_since(t0);

  t0 = Clock::now();
  GlobalStep step = assemble_global(totals, globals.inducing, globals.kernel, jitter);
  ev.timings.global = seconds_since(t0);

  backend.set_accumulators(step.accum);
  std::vector<LocalGradient> local = backend.compute_gradients(timing);
  split_timings(timing, ev.timings.grad_wall, ev.timings.grad_cpu);

  BoundReport& r = ev.report;
  r.value = step.value;
  r.jitter = step.jitter;
  r.grad_global = std::move(step.grad);
  for (const LocalGradient& g : local) r.grad_global += g.global;
  r.local = std::move(local);
  r.accum = std::move(step.accum);
  ev.timings.total = seconds_since(t_start);
  return ev;
}

Evaluation run_iteration(Backend& backend, const GlobalParams& globals,
                         const JitterPolicy& jitter) {
  return run_iteration(backend, globals.flatten(), globals.m(), globals.q(), jitter);
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "joint") return TrainMode::kJoint;
  if (s == "alternating") return TrainMode::kAlternating;
  throw InvalidInput("unknown training mode '" + s + "'");
}

const char* to_string(TrainMode mode) {
  return mode == TrainMode::kJoint ? "joint" : "alternating";
}

Vector pack_joint(const GlobalParams& globals, const LatentPosterior& latents) {
  const Vector g = globals.flatten();
  if (latents.frozen) return g;
  const Index nq = latents.means.size();
  Vector x(g.size() + 2 * nq);
  x.head(g.size()) = g;
  const Matrix mt = latents.means.transpose();
  const Matrix lt = latents.variances.array().log().matrix().transpose();
  x.segment(g.size(), nq) = Eigen::Map<const Vector>(mt.data(), nq);
  x.tail(nq) = Eigen::Map<const Vector>(lt.data(), nq);
  return x;
}

namespace {

Matrix unpack_block(const Vector& x, Index offset, Index n, Index q) {
  return Eigen::Map<const Matrix>(x.data() + offset, q, n).transpose();
}

Matrix clamp_log_variances(Matrix lv) {
  return lv.array().max(-kLogVarLimit).min(kLogVarLimit).matrix();
}

}  // namespace

void unpack_joint(const Vector& x, Index m, Index q, GlobalParams& globals,
                  LatentPosterior& latents) {
  const Index gsize = GlobalParams::flat_size(m, q);
  globals = GlobalParams::unflatten(x.head(gsize), m, q);
  if (latents.frozen) return;
  const Index n = latents.size();
  if (x.size() != gsize + 2 * n * q) throw DimensionError("joint vector has the wrong length");
  latents.means = unpack_block(x, gsize, n, q);
  latents.variances =
      clamp_log_variances(unpack_block(x, gsize + n * q, n, q)).array().exp().matrix();
}

namespace {

// -F and its gradient over the joint vector, or over G alone when
// `with_locals` is false.
class NegativeBound {
 public:
  NegativeBound(Backend& backend, Index m, Index q, const LatentPosterior& latents,
                bool with_locals, const JitterPolicy& jitter, std::vector<double>& trace)
      : backend_(backend), m_(m), q_(q), latents_(latents), with_locals_(with_locals),
        jitter_(jitter), trace_(trace) {}

  double operator()(const Vector& x, Vector& grad) {
    const Index gsize = GlobalParams::flat_size(m_, q_);
    if (with_locals_) {
      const Index n = latents_.size();
      latents_.means = unpack_block(x, gsize, n, q_);
      const Matrix lv = clamp_log_variances(unpack_block(x, gsize + n * q_, n, q_));
      latents_.variances = lv.array().exp().matrix();
      backend_.set_locals(latents_.means, lv);
    }
    Evaluation ev;
    if (!representable(x.head(gsize), q_)) {
      trace_.push_back(-std::numeric_limits<double>::infinity());
      grad.setZero();
      return std::numeric_limits<double>::infinity();
    }
    try {
      ev = run_iteration(backend_, x.head(gsize), m_, q_, jitter_);
    } catch (const FactorizationError&) {
      trace_.push_back(-std::numeric_limits<double>::infinity());
      grad.setZero();
      return std::numeric_limits<double>::infinity();
    }
    trace_.push_back(ev.report.value);

    grad.head(gsize) = -flatten_gradient(ev.report.grad_global);
    if (noise_capped(x.head(gsize))) grad[gsize - 1] = 0.0;
    if (with_locals_) {
      const Index n = latents_.size();
      const Index nq = n * q_;
      Matrix dm(q_, n);
      Matrix dl(q_, n);
      const auto& parts = backend_.partitions();
      for (const Partition& p : parts) {
        const LocalGradient& lg = ev.report.local[p.index];
        dm.middleCols(p.begin, p.count) = -lg.d_means.transpose();
        dl.middleCols(p.begin, p.count) = -lg.d_log_variances.transpose();
      }
      grad.segment(gsize, nq) = Eigen::Map<const Vector>(dm.data(), nq);
      grad.tail(nq) = Eigen::Map<const Vector>(dl.data(), nq);
    }
    return -ev.report.value;
  }

  const LatentPosterior& latents() const { return latents_; }

 private:
  Backend& backend_;
  Index m_;
  Index q_;
  LatentPosterior latents_;
  bool with_locals_;
  JitterPolicy jitter_;
  std::vector<double>& trace_;
};

void negate_into(const std::vector<double>& from, std::vector<double>& to) {
  for (double v : from) to.push_back(-v);
}

}  // namespace

TrainResult optimize(Backend& backend, const GlobalParams& globals,
                     const LatentPosterior& latents, const TrainConfig& config) {
  config.optim.validate();
  const Index m = globals.m();
  const Index q = globals.q();
  TrainResult out;
  out.globals = globals;
  out.latents = latents;

  const bool latent = !latents.frozen;
  if (latent) set_locals(backend, latents);

  if (config.mode == TrainMode::kJoint || !latent) {
    NegativeBound f(backend, m, q, latents, latent, config.jitter, out.trace);
    const OptimResult r = minimize(config.method, std::ref(f), pack_joint(globals, latents),
                                   config.optim);
    unpack_joint(r.x, m, q, out.globals, out.latents);
    out.value = -r.value;
    negate_into(r.accepted, out.accepted);
    out.evals = r.evals;
    out.reason = r.reason;
    out.flagged = r.flagged();
    if (latent) set_locals(backend, out.latents);
    return out;
  }

  // Alternating: G by the optimizer with locals fixed, then a round of
  // local gradient steps on the workers against fresh accumulators.
  Vector g = globals.flatten();
  bool stale = false;  // locals moved since F was last evaluated
  for (std::size_t round = 0; config.max_rounds == 0 || round < config.max_rounds; ++round) {
    if (out.evals >= config.optim.max_evals) break;
    OptimizerConfig budget = config.optim;
    budget.max_evals = std::min(config.global_evals, config.optim.max_evals - out.evals);
    NegativeBound f(backend, m, q, out.latents, false, config.jitter, out.trace);
    const OptimResult r = minimize(config.method, std::ref(f), g, budget);
    out.evals += r.evals;
    g = r.x;
    out.value = -r.value;
    out.accepted.push_back(out.value);
    out.reason = r.reason;
    out.flagged = r.flagged();
    stale = false;
    if (config.local_steps == 0) {
      if (r.converged()) break;
      continue;
    }
    if (out.evals >= config.optim.max_evals) break;
    // refresh the accumulators at the new G before the local steps
    const Evaluation ev = run_iteration(backend, g, m, q, config.jitter);
    ++out.evals;
    out.trace.push_back(ev.report.value);
    backend.local_step(config.local_steps, config.local_step_size);
    out.latents = backend.gather_locals();
    stale = true;
  }
  out.globals = GlobalParams::unflatten(g, m, q);
  if (stale) {
    out.value = run_iteration(backend, g, m, q, config.jitter).report.value;
    ++out.evals;
    out.trace.push_back(out.value);
    out.accepted.push_back(out.value);
  }
  return out;
}

}  // namespace dgp
