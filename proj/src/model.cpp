#include "dgp/model.hpp"

#include <cmath>
#include <limits>

namespace dgp {

namespace {

double mean_column_variance(const Matrix& M) {
  if (M.rows() == 0) return 0.0;
  const RowVector mu = M.colwise().mean();
  return (M.rowwise() - mu).array().square().mean();
}

double positive_or(double v, double fallback) {
  return (v > 0.0 && std::isfinite(v)) ? v : fallback;
}

void check_finite(const Matrix& M, const char* what) {
  if (!M.allFinite()) throw InvalidInput(std::string(what) + " contains NaN or Inf");
}

}  // namespace

const char* to_string(ModelMode mode) {
  return mode == ModelMode::kRegression ? "regression" : "latent";
}

void ModelState::validate() const {
  globals.validate();
  latents.validate();
  if (latents.size() != Y.rows()) throw DimensionError("latents and Y differ in row count");
  if (latents.dim() != globals.q()) {
    throw DimensionError("latent dimension does not match the inducing inputs");
  }
  if ((mode == ModelMode::kRegression) != latents.frozen) {
    throw InvalidInput("regression mode requires frozen latents and vice versa");
  }
  if (input_standardization && input_standardization->mean.size() != q()) {
    throw DimensionError("input standardization does not match q");
  }
  if (output_standardization && output_standardization->mean.size() != d()) {
    throw DimensionError("output standardization does not match d");
  }
  if (pca && (pca->mean.size() != d() || pca->dim() != q())) {
    throw DimensionError("PCA projection does not match the model");
  }
}

ModelState new_regression(const Matrix& X, const Matrix& Y, Index m, std::uint64_t seed,
                          const RegressionInit& options) {
  const Index n = Y.rows();
  if (X.rows() != n) throw DimensionError("X and Y differ in row count");
  if (X.cols() < 1) throw InvalidInput("regression needs at least one input column");
  if (m < 1 || m > n) {
    throw InvalidInput("inducing count m = " + std::to_string(m) + " must be in [1, n = " +
                       std::to_string(n) + "]");
  }
  check_finite(X, "inputs");
  check_finite(Y, "outputs");

  ModelState s;
  s.mode = ModelMode::kRegression;
  s.Y = Y;
  s.latents = LatentPosterior::observed(X);
  if (options.inducing_at_inputs) {
    if (m != n) throw InvalidInput("inducing inputs at X requires m == n");
    s.globals.inducing = InducingInputs(X);
  } else {
    s.globals.inducing = InducingInputs(init_inducing(X, m, seed));
  }
  const double var_y = positive_or(mean_column_variance(Y), 1.0);
  s.globals.kernel.signal_variance = var_y;
  s.globals.kernel.ard_weights.resize(X.cols());
  for (Index r = 0; r < X.cols(); ++r) {
    s.globals.kernel.ard_weights[r] = 1.0 / positive_or(mean_column_variance(X.col(r)), 1.0);
  }
  s.globals.kernel.noise_precision = std::min(10.0 / var_y, kMaxNoisePrecision);
  s.validate();
  return s;
}

ModelState new_gplvm(const Matrix& Y, Index q, Index m, std::uint64_t seed) {
  const Index n = Y.rows();
  if (q < 1 || q > Y.cols()) {
    throw InvalidInput("latent dimension q = " + std::to_string(q) + " must be in [1, d = " +
                       std::to_string(Y.cols()) + "]");
  }
  if (m < 1 || m > n) {
    throw InvalidInput("inducing count m = " + std::to_string(m) + " must be in [1, n = " +
                       std::to_string(n) + "]");
  }
  check_finite(Y, "outputs");

  ModelState s;
  s.mode = ModelMode::kLatent;
  s.Y = Y;
  s.pca = fit_pca(Y, q);
  const Matrix means = s.pca->apply(Y);
  s.latents = LatentPosterior::latent(means, Matrix::Constant(n, q, kInitialLatentVariance));
  s.globals.inducing = InducingInputs(init_inducing(means, m, seed));
  const double var_y = positive_or(mean_column_variance(Y), 1.0);
  s.globals.kernel.signal_variance = var_y;
  s.globals.kernel.ard_weights = Vector::Ones(q);
  s.globals.kernel.noise_precision = std::min(100.0 / var_y, kMaxNoisePrecision);
  s.validate();
  return s;
}

TrainResult train(ModelState& state, Backend& backend, const TrainConfig& config) {
  state.validate();
  backend.load(state.Y, state.latents, make_partitions(state.n(), backend.workers()));
  TrainResult r = optimize(backend, state.globals, state.latents, config);
  state.globals = r.globals;
  if (state.mode == ModelMode::kLatent) state.latents = r.latents;
  return r;
}

TrainResult train(ModelState& state, const FitOptions& options) {
  auto backend = make_backend(options.backend, options.workers, options.backend_options);
  return train(state, *backend, options.train);
}

RestartOutcome train_with_restarts(const std::function<ModelState(std::uint64_t)>& init,
                                   std::uint64_t seed, std::size_t restarts,
                                   const FitOptions& options) {
  if (restarts < 1) throw InvalidInput("restarts must be at least 1");
  std::optional<RestartOutcome> best;
  std::vector<double> values;
  for (std::size_t r = 0; r < restarts; ++r) {
    ModelState s = init(seed + r);
    TrainResult t = train(s, options);
    values.push_back(t.value);
    if (!best || t.value > best->result.value) best = RestartOutcome{std::move(s), std::move(t), r, {}};
  }
  best->values = std::move(values);
  return std::move(*best);
}

double evaluate_bound(const ModelState& state, const JitterPolicy& jitter) {
  const PartialSums totals =
      local_terms(state.Y, state.latents, state.globals.inducing, state.globals.kernel);
  return assemble_global(totals, state.globals.inducing, state.globals.kernel, jitter).value;
}

Prediction predict(const ModelState& state, const Matrix& Xstar, bool include_noise,
                   const JitterPolicy& jitter) {
  if (Xstar.cols() != state.q()) {
    throw DimensionError("prediction inputs have " + std::to_string(Xstar.cols()) +
                         " columns, model expects " + std::to_string(state.q()));
  }
  check_finite(Xstar, "prediction inputs");
  const Matrix Xs =
      state.input_standardization ? state.input_standardization->apply(Xstar) : Xstar;
  const GlobalParams& g = state.globals;
  const Index m = g.m();
  const double beta = g.kernel.noise_precision;

  const PartialSums totals = local_terms(state.Y, state.latents, g.inducing, g.kernel);
  const Matrix Kmm = kernel_matrix(g.inducing.Z, g.inducing.Z, g.kernel);
  const JitteredCholesky chol = jittered_cholesky(Kmm, g.kernel.signal_variance, jitter);
  const auto L = chol.llt.matrixL();

  // K_mm + beta D = L (I + A) L^T
  const Matrix LiD = L.solve(totals.D);
  Matrix B = beta * L.solve(LiD.transpose());
  B = 0.5 * (B + B.transpose()).eval();
  B.diagonal().array() += 1.0;
  const Eigen::LLT<Matrix> llt_b = cholesky(B, "I + beta L^-1 D L^-T");
  const auto LB = llt_b.matrixL();

  const Matrix Ksm = kernel_matrix(Xs, g.inducing.Z, g.kernel);
  const Matrix V = L.solve(Ksm.transpose());      // m x n*
  const Matrix W = LB.solve(V);                   // m x n*
  const Matrix E = LB.solve(L.solve(totals.C));   // m x d

  Prediction p;
  p.mean = beta * W.transpose() * E;
  Vector var = (g.kernel.signal_variance - V.colwise().squaredNorm().array() +
                W.colwise().squaredNorm().array())
                   .matrix()
                   .transpose();
  var = var.cwiseMax(0.0);
  if (include_noise) var.array() += 1.0 / beta;
  p.variance = var.replicate(1, state.d());
  (void)m;

  if (state.output_standardization) {
    const Standardization& s = *state.output_standardization;
    p.mean = s.invert(p.mean);
    for (Index c = 0; c < state.d(); ++c) {
      if (!s.constant[static_cast<std::size_t>(c)]) p.variance.col(c) *= s.scale[c] * s.scale[c];
    }
  }
  return p;
}

namespace {
constexpr double kTestLatentStallTolerance = 1e-2;
}  // namespace

OptimizerConfig DensityModel::default_config() {
  OptimizerConfig c;
  c.max_evals = 200;
  c.grad_tol = 1e-4;
  c.obj_tol = 1e-10;
  return c;
}

DensityModel::DensityModel(const ModelState& state, const JitterPolicy& jitter)
    : state_(state), jitter_(jitter) {
  if (state.mode != ModelMode::kLatent) {
    throw InvalidInput("density scoring needs a latent-variable model");
  }
  state_.validate();
  const GlobalParams& g = state_.globals;
  totals_ = local_terms(state_.Y, state_.latents, g.inducing, g.kernel);
  log_marginal_ = assemble_global(totals_, g.inducing, g.kernel, jitter_).value;
  column_sq_ = state_.Y.colwise().squaredNorm();
  if (state_.output_standardization) {
    const Standardization& s = *state_.output_standardization;
    for (Index c = 0; c < state_.d(); ++c) {
      if (!s.constant[static_cast<std::size_t>(c)]) log_jacobian_ -= std::log(s.scale[c]);
    }
  }
}

TestLatent DensityModel::fit_point(const RowVector& y, const std::vector<bool>& observed,
                                   const OptimizerConfig& config) const {
  const Index d = state_.d();
  const Index q = state_.q();
  if (y.size() != d) {
    throw DimensionError("test vector has " + std::to_string(y.size()) +
                         " dimensions, model has " + std::to_string(d));
  }
  if (!observed.empty() && observed.size() != static_cast<std::size_t>(d)) {
    throw DimensionError("observation mask has the wrong length");
  }
  std::vector<Index> cols;
  for (Index c = 0; c < d; ++c) {
    if (observed.empty() || observed[static_cast<std::size_t>(c)]) cols.push_back(c);
  }
  if (cols.empty()) throw InvalidInput("at least one dimension must be observed");

  RowVector yz = state_.output_standardization
                     ? RowVector(state_.output_standardization->apply(y))
                     : y;
  for (Index c : cols) {
    if (!std::isfinite(yz[c])) throw InvalidInput("observed test values must be finite");
  }

  // training sums restricted to the observed columns
  const Index dk = static_cast<Index>(cols.size());
  PartialSums base;
  base.B = totals_.B;
  base.KL = totals_.KL;
  base.count = totals_.count;
  base.D = totals_.D;
  base.C.resize(state_.m(), dk);
  RowVector y_obs(dk);
  for (Index k = 0; k < dk; ++k) {
    base.C.col(k) = totals_.C.col(cols[static_cast<std::size_t>(k)]);
    base.A += column_sq_[cols[static_cast<std::size_t>(k)]];
    y_obs[k] = yz[cols[static_cast<std::size_t>(k)]];
  }

  // start from the PCA projection, unobserved entries at the PCA mean
  Vector x0(2 * q);
  if (state_.pca) {
    RowVector filled = state_.pca->mean;
    for (Index c : cols) filled[c] = yz[c];
    x0.head(q) = state_.pca->apply(filled).transpose();
  } else {
    x0.head(q).setZero();
  }
  x0.tail(q).setConstant(std::log(kInitialLatentVariance));

  const GlobalParams& g = state_.globals;
  const Objective f = [&](const Vector& x, Vector& grad) {
    const RowVector mu = x.head(q).transpose();
    const RowVector s = x.tail(q).array().max(-700.0).min(700.0).exp().matrix().transpose();
    const LatentPosterior point = LatentPosterior::latent(mu, s);
    PartialSums tot = base;
    tot += local_terms(y_obs, point, g.inducing, g.kernel);
    GlobalStep step;
    try {
      step = assemble_global(tot, g.inducing, g.kernel, jitter_);
    } catch (const FactorizationError&) {
      grad.setZero();
      return std::numeric_limits<double>::infinity();
    }
    const LocalGradient lg = local_gradients(y_obs, point, g.inducing, g.kernel, step.accum);
    grad.head(q) = -lg.d_means.row(0).transpose();
    grad.tail(q) = -lg.d_log_variances.row(0).transpose();
    return -step.value;
  };
  const OptimResult r = lbfgs(f, x0, config);

  TestLatent out;
  out.mean = r.x.head(q).transpose();
  out.variance = r.x.tail(q).array().exp().matrix().transpose();
  out.bound = -r.value;
  // A line-search stall with a small gradient is the rounding floor of F,
  // not a failure: the remaining gain is far below the score's precision.
  out.converged = r.converged() ||
                  (r.reason == StopReason::kLineSearch &&
                   r.grad.cwiseAbs().maxCoeff() < kTestLatentStallTolerance);
  out.reason = r.reason;
  out.evals = r.evals;
  return out;
}

double DensityModel::score(const RowVector& y, bool* converged) const {
  const TestLatent t = fit_point(y);
  if (converged) *converged = t.converged;
  return t.bound - log_marginal_ + log_jacobian_;
}

Classification classify_by_density(std::span<const DensityModel> models, const RowVector& y) {
  if (models.empty()) throw InvalidInput("no class models");
  const Index d = models.front().state().d();
  for (const auto& m : models) {
    if (m.state().d() != d) throw DimensionError("class models differ in output dimension");
  }
  Classification c;
  for (const auto& m : models) {
    bool ok = false;
    c.scores.push_back(m.score(y, &ok));
    c.converged.push_back(ok);
  }
  // strict comparison keeps the lowest index on ties
  for (std::size_t i = 1; i < c.scores.size(); ++i) {
    if (c.scores[i] > c.scores[c.label]) c.label = i;
  }
  return c;
}

Reconstruction reconstruct(const DensityModel& model, const RowVector& y_partial,
                           const std::vector<bool>& observed) {
  const ModelState& s = model.state();
  if (observed.size() != static_cast<std::size_t>(s.d())) {
    throw DimensionError("observation mask has the wrong length");
  }
  if (std::none_of(observed.begin(), observed.end(), [](bool b) { return b; })) {
    throw InvalidInput("reconstruction needs at least one observed dimension");
  }
  Reconstruction r;
  r.latent = model.fit_point(y_partial, observed);
  r.predicted = predict(s, r.latent.mean, false).mean.row(0);
  r.filled = r.predicted;
  for (Index c = 0; c < s.d(); ++c) {
    if (observed[static_cast<std::size_t>(c)]) r.filled[c] = y_partial[c];
  }
  return r;
}

}  // namespace dgp
