#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dgp/backend.hpp"
#include "dgp/data.hpp"
#include "dgp/engine.hpp"
#include "dgp/init.hpp"

namespace dgp {

enum class ModelMode : std::uint8_t { kRegression = 0, kLatent = 1 };

const char* to_string(ModelMode mode);

/// Everything needed to resume training or to predict: the (possibly
/// standardized) training outputs, the variational posterior over inputs,
/// and the global parameters.
struct ModelState {
  ModelMode mode = ModelMode::kRegression;
  Matrix Y;                 // n x d, in model space
  LatentPosterior latents;  // frozen at X in regression mode
  GlobalParams globals;
  // Maps from user space to model space, applied by predict and the
  // density scorer.
  std::optional<Standardization> input_standardization;
  std::optional<Standardization> output_standardization;
  // Latent mode: the projection the latents were initialized from, reused
  // to place fresh test latents.
  std::optional<PcaProjection> pca;

  Index n() const { return Y.rows(); }
  Index d() const { return Y.cols(); }
  Index m() const { return globals.m(); }
  Index q() const { return globals.q(); }

  // Throws on any broken invariant.
  void validate() const;
};

struct RegressionInit {
  bool inducing_at_inputs = false;  // Z = X (requires m == n)
};

ModelState new_regression(const Matrix& X, const Matrix& Y, Index m, std::uint64_t seed,
                          const RegressionInit& options = {});

// Latent means are the PCA scores scaled to unit variance, variances 0.1.
inline constexpr double kInitialLatentVariance = 0.1;
ModelState new_gplvm(const Matrix& Y, Index q, Index m, std::uint64_t seed);

struct FitOptions {
  TrainConfig train;
  BackendKind backend = BackendKind::kSerial;
  std::size_t workers = 1;
  BackendOptions backend_options;
};

// Loads the state into a fresh backend, maximizes F and writes the result
// back into `state`.
TrainResult train(ModelState& state, const FitOptions& options);

// Same, on a caller-owned backend (reloaded with the state's data).
TrainResult train(ModelState& state, Backend& backend, const TrainConfig& config);

struct RestartOutcome {
  ModelState state;  // the winning trained state
  TrainResult result;
  std::size_t best = 0;
  std::vector<double> values;  // final F per restart
};

// Trains one model per seed (seed, seed + 1, ...) from init(seed) and keeps
// the largest final bound; ties keep the earliest restart.
RestartOutcome train_with_restarts(const std::function<ModelState(std::uint64_t)>& init,
                                   std::uint64_t seed, std::size_t restarts,
                                   const FitOptions& options);

// Bound F at the state's current parameters (single process).
double evaluate_bound(const ModelState& state, const JitterPolicy& jitter = {});

struct Prediction {
  Matrix mean;      // n* x d
  Matrix variance;  // n* x d; identical columns (shared kernel)
};

// Predictive distribution at inputs X* (latent coordinates in latent mode),
// given in user space; outputs are returned in user space.
Prediction predict(const ModelState& state, const Matrix& Xstar, bool include_noise,
                   const JitterPolicy& jitter = {});

struct TestLatent {
  RowVector mean;
  RowVector variance;
  double bound = 0.0;  // F over the training data plus the new point
  bool converged = false;
  StopReason reason = StopReason::kMaxEvals;
  std::size_t evals = 0;
};

/// Scores new output vectors against a trained latent-variable model by
/// fitting a fresh latent point with every other parameter held fixed.
/// Precomputes the training sums once.
class DensityModel {
 public:
  explicit DensityModel(const ModelState& state, const JitterPolicy& jitter = {});

  // Bound on the training data alone.
  double log_marginal() const { return log_marginal_; }

  // `y` is in user space.  `observed` selects the dimensions that enter the
  // bound (all when empty).
  TestLatent fit_point(const RowVector& y, const std::vector<bool>& observed = {},
                       const OptimizerConfig& config = default_config()) const;

  // log p(y | Y) approximation: F(Y, y) - F(Y), converted back to user
  // space when outputs were standardized.
  double score(const RowVector& y, bool* converged = nullptr) const;

  const ModelState& state() const { return state_; }

  static OptimizerConfig default_config();

 private:
  ModelState state_;
  JitterPolicy jitter_;
  PartialSums totals_;
  RowVector column_sq_;  // per-column sum of squares of Y
  double log_marginal_ = 0.0;
  double log_jacobian_ = 0.0;
};

struct Classification {
  std::size_t label = 0;
  std::vector<double> scores;
  std::vector<bool> converged;
};

// argmax of the per-class scores; ties go to the lowest class index.
Classification classify_by_density(std::span<const DensityModel> models, const RowVector& y);

struct Reconstruction {
  RowVector filled;     // observed entries kept, the rest predicted
  RowVector predicted;  // predictive mean for every dimension
  TestLatent latent;
};

// Requires a latent-mode model and at least one observed dimension.
Reconstruction reconstruct(const DensityModel& model, const RowVector& y_partial,
                           const std::vector<bool>& observed);

// Versioned little-endian binary checkpoint ("DGPM"), written atomically
// through a temporary file and rename.
inline constexpr std::uint16_t kCheckpointVersion = 1;
std::vector<std::uint8_t> encode_checkpoint(const ModelState& state);
ModelState decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::string& path, const ModelState& state);
ModelState load_checkpoint(const std::string& path);

}  // namespace dgp
