// dgp: train, evaluate and benchmark sparse GP regression and Bayesian
// GPLVM models.  Exit status 0 on success, 1 on runtime or model errors,
// 2 on usage errors.

#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "dgp/bench.hpp"
#include "dgp/gradcheck.hpp"
#include "dgp/model.hpp"

namespace {

using namespace dgp;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Echo = std::vector<std::pair<std::string, std::string>>;

void print_echo(std::ostream& out, const Echo& echo) {
  for (const auto& [k, v] : echo) fmt::print(out, "# {}: {}\n", k, v);
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

// Opens `path` for writing, or returns stdout for "-" / empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path);
    if (!file_) throw InvalidInput("cannot write '" + path + "'");
  }
  std::ostream& get() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

struct DataFlags {
  std::string path;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  bool no_header = false;
  double divisor = 1.0;

  void add(CLI::App* app, bool with_inputs) {
    app->add_option("--data", path, "CSV or DGPD dataset")->required()->check(CLI::ExistingFile);
    if (with_inputs) {
      app->add_option("--inputs", inputs, "input columns (names, or indices with --no-header)")
          ->delimiter(',');
    }
    app->add_option("--outputs", outputs, "output columns (default: every non-input column)")
        ->delimiter(',');
    app->add_flag("--no-header", no_header, "CSV has no header row; columns are 0-based indices");
    app->add_option("--output-divisor", divisor, "divide outputs by this on load (255 for pixels)")
        ->check(CLI::PositiveNumber);
  }

  Dataset load() const {
    CsvOptions o;
    o.inputs = inputs;
    o.outputs = outputs;
    o.header = !no_header;
    o.output_divisor = divisor;
    return load_dataset(path, o);
  }

  void echo(Echo& e) const {
    e.emplace_back("data", path);
    e.emplace_back("inputs", join(inputs));
    e.emplace_back("outputs", outputs.empty() ? "(rest)" : join(outputs));
    e.emplace_back("header", no_header ? "no" : "yes");
    e.emplace_back("output_divisor", fmt::format("{}", divisor));
  }
};

struct BackendFlags {
  std::string backend = "serial";
  std::size_t workers = 1;
  std::string worker_path;

  void add(CLI::App* app) {
    app->add_option("--backend", backend, "serial | threads | procs")
        ->check(CLI::IsMember({"serial", "threads", "procs"}));
    app->add_option("--workers", workers, "number of partitions / workers")
        ->check(CLI::PositiveNumber);
    app->add_option("--worker-path", worker_path,
                    "dgp-worker executable for --backend procs (else $DGP_WORKER)");
  }
  BackendOptions options() const { return {.worker_path = worker_path, .fail_partition = {}}; }
};

// ---------------------------------------------------------------- train

struct TrainFlags {
  DataFlags data;
  BackendFlags backend;
  std::string mode;
  Index latent_dim = 2;
  Index inducing = 50;
  std::string optimizer = "lbfgs";
  std::string train_mode = "joint";
  std::size_t max_evals = 500;
  std::uint64_t seed = 1;
  int restarts = -1;
  bool no_standardize = false;
  std::string checkpoint;
  std::string trace;
  std::string eval_trace;
};

int cmd_train(const TrainFlags& f) {
  const bool reg = f.mode == "reg";
  if (reg && f.data.inputs.empty()) throw UsageError("--mode reg requires --inputs");
  if (!reg && !f.data.inputs.empty()) throw UsageError("--inputs only applies to --mode reg");
  const std::size_t restarts =
      f.restarts >= 0 ? static_cast<std::size_t>(f.restarts) : (reg ? 1 : 3);
  if (restarts < 1) throw UsageError("--restarts must be at least 1");

  Echo echo{{"command", "train"}, {"mode", reg ? "reg" : "lvm"}};
  f.data.echo(echo);
  echo.insert(echo.end(), {{"latent_dim", reg ? "-" : std::to_string(f.latent_dim)},
                           {"inducing", std::to_string(f.inducing)},
                           {"optimizer", f.optimizer},
                           {"train_mode", f.train_mode},
                           {"max_evals", std::to_string(f.max_evals)},
                           {"seed", std::to_string(f.seed)},
                           {"restarts", std::to_string(restarts)},
                           {"standardize", f.no_standardize ? "no" : "yes"},
                           {"backend", f.backend.backend},
                           {"workers", std::to_string(f.backend.workers)},
                           {"checkpoint", f.checkpoint}});
  print_echo(std::cout, echo);

  Dataset ds = f.data.load();
  if (reg && !ds.has_inputs()) throw InvalidInput("dataset has no input columns");
  if (!f.no_standardize) ds = standardize(ds, reg, true);
  fmt::print("loaded {} rows, {} outputs{}\n", ds.size(), ds.Y.cols(),
             ds.dropped_rows ? fmt::format(" ({} dropped)", ds.dropped_rows) : "");

  FitOptions fit;
  fit.train.method = parse_method(f.optimizer);
  fit.train.mode = parse_train_mode(f.train_mode);
  fit.train.optim.max_evals = f.max_evals;
  fit.backend = parse_backend(f.backend.backend);
  fit.workers = f.backend.workers;
  fit.backend_options = f.backend.options();

  const auto init = [&](std::uint64_t seed) {
    ModelState s = reg ? new_regression(ds.X, ds.Y, f.inducing, seed)
                       : new_gplvm(ds.Y, f.latent_dim, f.inducing, seed);
    s.input_standardization = ds.input_standardization;
    s.output_standardization = ds.output_standardization;
    return s;
  };
  RestartOutcome out = train_with_restarts(init, f.seed, restarts, fit);
  for (std::size_t r = 0; r < out.values.size(); ++r) {
    fmt::print("restart {} (seed {}): F = {:.6f}{}\n", r, f.seed + r, out.values[r],
               r == out.best ? "  <- kept" : "");
  }
  const TrainResult& res = out.result;
  fmt::print("final F = {:.6f} after {} evaluations ({}){}\n", res.value, res.evals,
             to_string(res.reason), res.flagged ? " [flagged]" : "");
  const auto& k = out.state.globals.kernel;
  fmt::print("signal variance {:.6g}, noise variance {:.6g}, ARD weights [{}]\n",
             k.signal_variance, 1.0 / k.noise_precision,
             fmt::join(k.ard_weights.data(), k.ard_weights.data() + k.ard_weights.size(), ", "));

  save_checkpoint(f.checkpoint, out.state);
  const std::string trace_path = f.trace.empty() ? f.checkpoint + ".trace.csv" : f.trace;
  {
    Output t(trace_path);
    print_echo(t.get(), echo);
    t.get() << "step,bound\n";
    for (std::size_t i = 0; i < res.accepted.size(); ++i) {
      fmt::print(t.get(), "{},{}\n", i, res.accepted[i]);
    }
  }
  if (!f.eval_trace.empty()) {
    Output t(f.eval_trace);
    print_echo(t.get(), echo);
    t.get() << "eval,bound\n";
    for (std::size_t i = 0; i < res.trace.size(); ++i) {
      fmt::print(t.get(), "{},{}\n", i, res.trace[i]);
    }
  }
  fmt::print("wrote {} and {}\n", f.checkpoint, trace_path);
  return 0;
}

// ---------------------------------------------------------------- predict

struct PredictFlags {
  std::string checkpoint;
  std::string data;
  std::vector<std::string> inputs;
  std::vector<std::string> targets;
  bool no_header = false;
  bool include_noise = false;
  std::string output;
};

int cmd_predict(const PredictFlags& f) {
  if (f.inputs.empty()) throw UsageError("--inputs is required");
  Echo echo{{"command", "predict"},        {"checkpoint", f.checkpoint},
            {"data", f.data},              {"inputs", join(f.inputs)},
            {"targets", join(f.targets)},  {"header", f.no_header ? "no" : "yes"},
            {"include_noise", f.include_noise ? "yes" : "no"}};
  Output out(f.output);
  std::ostream& os = out.get();
  // keep stdout parseable as CSV when it carries the predictions
  std::ostream& log = f.output.empty() || f.output == "-" ? std::cerr : std::cout;

  const ModelState state = load_checkpoint(f.checkpoint);
  CsvOptions o;
  o.inputs = f.inputs;
  o.outputs = f.targets;
  o.header = !f.no_header;
  Dataset ds;
  if (f.targets.empty()) {
    // load_csv takes every other column as outputs when none are named, so
    // ask for the inputs as outputs and move them across
    o.outputs = f.inputs;
    o.inputs.clear();
    ds = load_dataset(f.data, o);
    ds.X = ds.Y;
    ds.Y.resize(ds.X.rows(), 0);
  } else {
    ds = load_dataset(f.data, o);
  }
  if (ds.X.cols() != state.q()) {
    throw DimensionError(fmt::format("model expects {} input columns, got {}", state.q(),
                                     ds.X.cols()));
  }
  if (ds.Y.cols() > 0 && ds.Y.cols() != state.d()) {
    throw DimensionError(fmt::format("model has {} outputs, got {} target columns", state.d(),
                                     ds.Y.cols()));
  }
  const Prediction p = predict(state, ds.X, f.include_noise);

  print_echo(os, echo);
  std::vector<std::string> cols;
  for (Index c = 0; c < state.d(); ++c) cols.push_back(fmt::format("mean_{}", c));
  for (Index c = 0; c < state.d(); ++c) cols.push_back(fmt::format("var_{}", c));
  os << join(cols) << "\n";
  for (Index i = 0; i < p.mean.rows(); ++i) {
    std::string line;
    for (Index c = 0; c < state.d(); ++c) line += fmt::format("{}{}", c ? "," : "", p.mean(i, c));
    for (Index c = 0; c < state.d(); ++c) line += fmt::format(",{}", p.variance(i, c));
    os << line << "\n";
  }
  if (ds.Y.cols() > 0) {
    const double rmse = std::sqrt((p.mean - ds.Y).array().square().mean());
    fmt::print(log, "RMSE {:.6g} over {} rows\n", rmse, ds.Y.rows());
  }
  return 0;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(const GradCheckConfig& c, const std::string& mode) {
  GradCheckConfig cfg = c;
  cfg.latent = mode == "lvm";
  print_echo(std::cout, {{"command", "gradcheck"},
                         {"mode", mode},
                         {"n", std::to_string(cfg.n)},
                         {"m", std::to_string(cfg.m)},
                         {"q", std::to_string(cfg.q)},
                         {"d", std::to_string(cfg.d)},
                         {"seed", std::to_string(cfg.seed)},
                         {"step", fmt::format("{}", cfg.step)},
                         {"tolerance", fmt::format("{}", cfg.tolerance)},
                         {"flip_sign", cfg.flip_group.empty() ? "-" : cfg.flip_group}});
  bool ok = true;
  fmt::print("{:<10} {:>6} {:>14}  {}\n", "group", "size", "max_rel_err", "status");
  for (const GroupCheck& g : gradient_check(cfg)) {
    if (g.skipped) {
      fmt::print("{:<10} {:>6} {:>14}  frozen/skipped\n", g.name, g.size, "-");
      continue;
    }
    fmt::print("{:<10} {:>6} {:>14.3e}  {}\n", g.name, g.size, g.max_rel_err,
               g.passed ? "ok" : "FAIL");
    if (!g.passed) {
      ok = false;
      fmt::print(std::cerr, "gradient check failed for group {}\n", g.name);
    }
  }
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------- bench

struct BenchFlags {
  std::string kind = "strong";
  BenchWorkload workload;
  BenchConfig config;
  BackendFlags backend{.backend = "threads", .workers = 1, .worker_path = {}};
  std::vector<std::size_t> worker_counts{1, 2, 4};
  std::vector<std::size_t> scales{1, 2};
  std::vector<Index> sizes{10000, 40000};
  bool regression = false;
  std::string csv;
  std::string samples;
};

int cmd_bench(BenchFlags f) {
  f.workload.latent = !f.regression;
  f.config.backend = parse_backend(f.backend.backend);
  f.config.backend_options = f.backend.options();
  ScalingReport r;
  if (f.kind == "strong") {
    r = bench_strong(f.workload, f.worker_counts, f.config);
  } else if (f.kind == "weak") {
    r = bench_weak(f.workload, f.backend.workers, f.scales, f.config);
  } else if (f.kind == "load") {
    r = bench_load(f.workload, f.backend.workers, f.config);
  } else {
    r = bench_global(f.workload, f.sizes, f.backend.workers, f.config);
  }
  r.config.insert(r.config.begin(), {"command", "bench"});
  print_echo(std::cout, r.config);
  write_table(std::cout, r);
  for (const auto& row : r.rows) {
    if (row.oversubscribed) {
      fmt::print(std::cerr, "warning: {} workers exceed the {} hardware threads\n", row.workers,
                 std::thread::hardware_concurrency());
      break;
    }
  }
  if (!f.csv.empty()) {
    Output o(f.csv);
    write_csv(o.get(), r);
  }
  if (!f.samples.empty()) {
    Output o(f.samples);
    write_samples_csv(o.get(), r);
  }
  return 0;
}

// ---------------------------------------------------------------- classify

struct ClassifyFlags {
  std::vector<std::string> models;
  DataFlags data;
  std::string label_column;
  std::string output;
};

int cmd_classify(const ClassifyFlags& f) {
  Echo echo{{"command", "classify"}, {"models", join(f.models)}};
  f.data.echo(echo);
  echo.emplace_back("label_column", f.label_column.empty() ? "-" : f.label_column);
  Output out(f.output);
  std::ostream& os = out.get();
  std::ostream& log = f.output.empty() || f.output == "-" ? std::cerr : std::cout;

  std::vector<DensityModel> models;
  for (const auto& path : f.models) models.emplace_back(load_checkpoint(path));
  if (models.size() == 1) {
    fmt::print(std::cerr, "warning: a single class model; every row gets label 0\n");
  }

  DataFlags d = f.data;
  std::vector<double> truth;
  if (!f.label_column.empty()) {
    // labels travel as the single "input" column
    d.inputs = {f.label_column};
    const Dataset ds = d.load();
    truth.assign(ds.X.data(), ds.X.data() + ds.X.rows());
  }
  d.inputs = f.label_column.empty() ? std::vector<std::string>{}
                                    : std::vector<std::string>{f.label_column};
  const Dataset ds = d.load();

  print_echo(os, echo);
  std::string header = "row,label";
  for (std::size_t k = 0; k < models.size(); ++k) header += fmt::format(",score_{}", k);
  header += ",converged";
  if (!truth.empty()) header += ",truth";
  os << header << "\n";

  std::size_t correct = 0;
  std::size_t unconverged = 0;
  for (Index i = 0; i < ds.Y.rows(); ++i) {
    const Classification c = classify_by_density(models, ds.Y.row(i));
    std::string line = fmt::format("{},{}", i, c.label);
    bool all = true;
    for (std::size_t k = 0; k < c.scores.size(); ++k) {
      line += fmt::format(",{}", c.scores[k]);
      all = all && c.converged[k];
    }
    unconverged += !all;
    line += all ? ",1" : ",0";
    if (!truth.empty()) {
      line += fmt::format(",{}", truth[static_cast<std::size_t>(i)]);
      correct += static_cast<double>(c.label) == truth[static_cast<std::size_t>(i)];
    }
    os << line << "\n";
  }
  if (unconverged) {
    fmt::print(std::cerr, "warning: {} rows had an unconverged test latent (best value used)\n",
               unconverged);
  }
  if (!truth.empty()) {
    fmt::print(log, "accuracy {:.4f} ({} / {})\n",
               static_cast<double>(correct) / static_cast<double>(ds.Y.rows()), correct,
               ds.Y.rows());
  }
  return 0;
}

// ---------------------------------------------------------------- synth

struct SynthFlags {
  std::string kind = "regression";
  std::size_t n = 500;
  std::uint64_t seed = 1;
  double noise = 0.1;
  Index dim = 4;
  double separation = 3.0;
  std::string out;
};

void write_with_echo(const std::string& path, const Dataset& ds, const Echo& echo) {
  std::vector<std::string> comments;
  for (const auto& [k, v] : echo) comments.push_back(k + ": " + v);
  write_csv(path, ds, comments);
}

int cmd_synth(const SynthFlags& f) {
  const Echo echo{{"command", "synth"},
                  {"kind", f.kind},
                  {"n", std::to_string(f.n)},
                  {"seed", std::to_string(f.seed)},
                  {"noise", fmt::format("{}", f.noise)},
                  {"dim", std::to_string(f.dim)},
                  {"separation", fmt::format("{}", f.separation)}};
  print_echo(std::cout, echo);
  if (f.kind == "regression") {
    write_with_echo(f.out, synth_regression(f.n, f.seed, f.noise), echo);
  } else if (f.kind == "latent1d") {
    write_with_echo(f.out, synth_latent_1d(f.n, f.seed, f.noise), echo);
  } else {
    // one file per class plus a combined file with a label column
    const auto classes = synth_two_class(f.n, f.dim, f.separation, f.seed);
    const std::filesystem::path base(f.out);
    const std::string stem = (base.parent_path() / base.stem()).string();
    Dataset all;
    all.Y.resize(0, f.dim);
    all.X.resize(0, 1);
    for (std::size_t k = 0; k < classes.size(); ++k) {
      const std::string path = fmt::format("{}.class{}.csv", stem, k);
      write_with_echo(path, classes[k], echo);
      fmt::print("wrote {}\n", path);
      const Index r0 = all.Y.rows();
      all.Y.conservativeResize(r0 + classes[k].Y.rows(), Eigen::NoChange);
      all.X.conservativeResize(r0 + classes[k].Y.rows(), Eigen::NoChange);
      all.Y.bottomRows(classes[k].Y.rows()) = classes[k].Y;
      all.X.bottomRows(classes[k].Y.rows()).setConstant(static_cast<double>(k));
    }
    all.input_names = {"label"};
    all.output_names = classes.front().output_names;
    write_with_echo(f.out, all, echo);
  }
  fmt::print("wrote {}\n", f.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  CLI::App app{"Distributed variational sparse GP regression and Bayesian GPLVM"};
  app.require_subcommand(1);

  TrainFlags train;
  auto* t = app.add_subcommand("train", "fit a model and write a checkpoint");
  train.data.add(t, true);
  train.backend.add(t);
  t->add_option("--mode", train.mode, "reg | lvm")->required()->check(CLI::IsMember({"reg", "lvm"}));
  t->add_option("--latent-dim", train.latent_dim, "latent dimension q (lvm)")
      ->check(CLI::PositiveNumber);
  t->add_option("--inducing", train.inducing, "number of inducing inputs m")
      ->check(CLI::PositiveNumber);
  t->add_option("--optimizer", train.optimizer, "scg | lbfgs")
      ->check(CLI::IsMember({"scg", "lbfgs"}));
  t->add_option("--train-mode", train.train_mode, "joint | alternating")
      ->check(CLI::IsMember({"joint", "alternating"}));
  t->add_option("--max-evals", train.max_evals, "bound evaluations per restart")
      ->check(CLI::PositiveNumber);
  t->add_option("--seed", train.seed, "initialization seed");
  t->add_option("--restarts", train.restarts,
                "initializations tried, best bound kept (default 1 reg, 3 lvm)");
  t->add_flag("--no-standardize", train.no_standardize, "train on raw values");
  t->add_option("--checkpoint", train.checkpoint, "output model file")->required();
  t->add_option("--trace", train.trace, "accepted-step bound trace CSV (default <checkpoint>.trace.csv)");
  t->add_option("--eval-trace", train.eval_trace, "bound at every evaluation, CSV");

  PredictFlags pred;
  auto* p = app.add_subcommand("predict", "predictive mean and variance from a checkpoint");
  p->add_option("--checkpoint", pred.checkpoint, "model file")->required();
  p->add_option("--data", pred.data, "CSV or DGPD file with the inputs")
      ->required()
      ->check(CLI::ExistingFile);
  p->add_option("--inputs", pred.inputs, "input columns (latent coordinates for lvm models)")
      ->delimiter(',');
  p->add_option("--targets", pred.targets, "ground-truth columns; prints RMSE")->delimiter(',');
  p->add_flag("--no-header", pred.no_header, "CSV has no header row");
  p->add_flag("--include-noise", pred.include_noise, "add the noise variance");
  p->add_option("--output", pred.output, "predictions CSV (default stdout)");

  GradCheckConfig gc;
  std::string gc_mode = "lvm";
  auto* g = app.add_subcommand("gradcheck", "finite-difference check of every gradient group");
  g->add_option("--mode", gc_mode, "reg | lvm")->check(CLI::IsMember({"reg", "lvm"}));
  g->add_option("--seed", gc.seed, "instance seed");
  g->add_option("--n", gc.n, "rows")->check(CLI::PositiveNumber);
  g->add_option("--m", gc.m, "inducing inputs")->check(CLI::PositiveNumber);
  g->add_option("--q", gc.q, "input dimension")->check(CLI::PositiveNumber);
  g->add_option("--d", gc.d, "output dimension")->check(CLI::PositiveNumber);
  g->add_option("--step", gc.step, "central-difference step")->check(CLI::PositiveNumber);
  g->add_option("--tolerance", gc.tolerance, "max relative error")->check(CLI::PositiveNumber);
  g->add_option("--flip-sign", gc.flip_group, "debug: negate this group's analytic gradient")
      ->check(CLI::IsMember(gradient_groups()));

  BenchFlags bench;
  auto* b = app.add_subcommand("bench", "scaling and overhead measurements");
  b->add_option("--kind", bench.kind, "strong | weak | load | global")
      ->check(CLI::IsMember({"strong", "weak", "load", "global"}));
  bench.backend.add(b);
  b->add_option("--n", bench.workload.n, "rows (base rows for weak)")->check(CLI::PositiveNumber);
  b->add_option("--inducing", bench.workload.m, "inducing inputs")->check(CLI::PositiveNumber);
  b->add_option("--latent-dim", bench.workload.q, "latent dimension")->check(CLI::PositiveNumber);
  b->add_option("--seed", bench.workload.seed, "workload seed");
  b->add_option("--worker-counts", bench.worker_counts, "strong: worker counts")->delimiter(',');
  b->add_option("--scales", bench.scales, "weak: scale factors")->delimiter(',');
  b->add_option("--sizes", bench.sizes, "global: dataset sizes")->delimiter(',');
  b->add_option("--iters", bench.config.iters, "timed iterations")->check(CLI::PositiveNumber);
  b->add_option("--warmup", bench.config.warmup, "untimed warm-up iterations");
  b->add_flag("--unbalanced", bench.config.unbalanced, "debug: give the first worker half the rows");
  b->add_flag("--regression", bench.regression, "observed inputs instead of latent ones");
  b->add_option("--csv", bench.csv, "summary CSV");
  b->add_option("--samples", bench.samples, "per-iteration CSV");

  ClassifyFlags cls;
  auto* c = app.add_subcommand("classify", "label rows by the class model with the largest score");
  c->add_option("--model", cls.models, "class checkpoint, repeated in class order")->required();
  cls.data.add(c, false);
  c->add_option("--label-column", cls.label_column, "true class index column; prints accuracy");
  c->add_option("--output", cls.output, "scores CSV (default stdout)");

  SynthFlags syn;
  auto* s = app.add_subcommand("synth", "write a synthetic dataset");
  s->add_option("--kind", syn.kind, "regression | latent1d | two-class")
      ->check(CLI::IsMember({"regression", "latent1d", "two-class"}));
  s->add_option("--n", syn.n, "rows (per class for two-class)")->check(CLI::PositiveNumber);
  s->add_option("--seed", syn.seed, "seed");
  s->add_option("--noise", syn.noise, "noise standard deviation")->check(CLI::NonNegativeNumber);
  s->add_option("--dim", syn.dim, "two-class: output dimension")->check(CLI::PositiveNumber);
  s->add_option("--separation", syn.separation, "two-class: distance between class centres");
  s->add_option("--out", syn.out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*t) return cmd_train(train);
    if (*p) return cmd_predict(pred);
    if (*g) return cmd_gradcheck(gc, gc_mode);
    if (*b) return cmd_bench(bench);
    if (*c) return cmd_classify(cls);
    if (*s) return cmd_synth(syn);
  } catch (const UsageError& e) {
    fmt::print(std::cerr, "usage error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return 1;
  }
  return 2;
}
