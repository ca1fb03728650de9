#include <gtest/gtest.h>

#include <random>

#include "dgp/bound.hpp"
#include "oracles.hpp"

namespace dgp {
namespace {

Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng,
                     double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix M(rows, cols);
  for (Index i = 0; i < M.size(); ++i) M.data()[i] = normal(rng);
  return M;
}

KernelParams params_for(Index q, double sf2, double alpha, double beta) {
  KernelParams p;
  p.signal_variance = sf2;
  p.ard_weights = Vector::Constant(q, alpha);
  p.noise_precision = beta;
  return p;
}

LatentPosterior random_latents(Index n, Index q, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 0.9);
  Matrix S(n, q);
  for (Index i = 0; i < S.size(); ++i) S.data()[i] = u(rng);
  return LatentPosterior::latent(random_matrix(n, q, rng), S);
}

std::vector<Block> split_blocks(const Matrix& Y, const LatentPosterior& lat,
                                std::vector<Index> sizes) {
  std::vector<Block> out;
  Index begin = 0;
  for (Index size : sizes) {
    out.push_back({Y.middleRows(begin, size), lat.rows(begin, size)});
    begin += size;
  }
  return out;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

TEST(LocalTerms, EmptyBlockIsZero) {
  const KernelParams p = params_for(2, 1.0, 1.0, 1.0);
  std::mt19937_64 rng(1);
  const InducingInputs Z(random_matrix(3, 2, rng));
  const PartialSums s =
      local_terms(Matrix(0, 2), LatentPosterior::observed(Matrix(0, 2)), Z, p);
  EXPECT_EQ(s.count, 0u);
  EXPECT_EQ(s.A, 0.0);
  EXPECT_EQ(s.B, 0.0);
  EXPECT_EQ(s.KL, 0.0);
  EXPECT_TRUE(s.C.isZero(0.0));
  EXPECT_TRUE(s.D.isZero(0.0));
  EXPECT_EQ(s.C.rows(), 3);
  EXPECT_EQ(s.C.cols(), 2);
}

TEST(LocalTerms, SingleObservedPoint) {
  const KernelParams p = params_for(2, 1.5, 0.8, 2.0);
  std::mt19937_64 rng(2);
  const InducingInputs Z(random_matrix(4, 2, rng));
  const Matrix X = random_matrix(1, 2, rng);
  const Matrix Y = random_matrix(1, 3, rng);
  const PartialSums s = local_terms(Y, LatentPosterior::observed(X), Z, p);
  const Matrix K = kernel_matrix(Z.Z, X, p);  // m x 1
  EXPECT_EQ(s.count, 1u);
  EXPECT_DOUBLE_EQ(s.A, Y.squaredNorm());
  EXPECT_EQ(s.B, 1.5);
  EXPECT_EQ(s.KL, 0.0);
  EXPECT_LT(rel_err(s.C, K * Y), 1e-15);
  EXPECT_LT(rel_err(s.D, K * K.transpose()), 1e-15);
}

TEST(LocalTerms, SplitsMergeToSingleBlock) {
  std::mt19937_64 rng(3);
  const KernelParams p = params_for(2, 1.2, 0.7, 3.0);
  const InducingInputs Z(random_matrix(5, 2, rng));
  const Matrix Y = random_matrix(20, 3, rng);
  const LatentPosterior lat = random_latents(20, 2, rng);
  const PartialSums whole = local_terms(Y, lat, Z, p);
  std::vector<PartialSums> parts;
  for (const Block& b : split_blocks(Y, lat, {5, 5, 5, 5})) {
    parts.push_back(local_terms(b.Y, b.latents, Z, p));
  }
  const PartialSums merged = reduce(parts);
  EXPECT_EQ(merged.count, 20u);
  EXPECT_LT(rel_err(merged.A, whole.A), 1e-12);
  EXPECT_LT(rel_err(merged.B, whole.B), 1e-12);
  EXPECT_LT(rel_err(merged.KL, whole.KL), 1e-12);
  EXPECT_LT(rel_err(merged.C, whole.C), 1e-12);
  EXPECT_LT(rel_err(merged.D, whole.D), 1e-12);
  // merge is commutative
  const PartialSums ab = merge(parts[0], parts[1]);
  const PartialSums ba = merge(parts[1], parts[0]);
  EXPECT_EQ(ab.A, ba.A);
  EXPECT_TRUE(ab.D == ba.D);
}

TEST(LocalTerms, MatchesNaiveStatistics) {
  std::mt19937_64 rng(4);
  const KernelParams p = params_for(3, 0.9, 1.1, 2.0);
  const InducingInputs Z(random_matrix(4, 3, rng));
  const Matrix Y = random_matrix(7, 2, rng);
  const LatentPosterior lat = random_latents(7, 3, rng);
  const PartialSums s = local_terms(Y, lat, Z, p);
  const auto ref = oracle::naive_stats(Y, lat.means, lat.variances, false, Z.Z, p);
  EXPECT_LT(rel_err(s.C, ref.C), 1e-12);
  EXPECT_LT(rel_err(s.D, ref.D), 1e-12);
  EXPECT_LT(rel_err(s.KL, ref.KL), 1e-12);
}

TEST(KlDiagGaussian, KnownValues) {
  RowVector mu = RowVector::Zero(3);
  RowVector s = RowVector::Ones(3);
  EXPECT_EQ(kl_diag_gaussian(mu, s), 0.0);
  RowVector one(1), var(1);
  one << 1.0;
  var << 1.0;
  EXPECT_DOUBLE_EQ(kl_diag_gaussian(one, var), 0.5);
  var << 0.0;
  EXPECT_THROW(kl_diag_gaussian(one, var), InvalidInput);
}

// KL(q || p) = int q log(q/p), factorised over dimensions; composite Simpson
// on +-12 standard deviations.
TEST(KlDiagGaussian, MatchesQuadrature) {
  RowVector mu(3), s(3);
  mu << 0.3, -1.2, 2.0;
  s << 0.4, 1.7, 0.05;
  double quad = 0.0;
  for (Index r = 0; r < 3; ++r) {
    const double sd = std::sqrt(s[r]);
    const double lo = mu[r] - 12.0 * sd;
    const double hi = mu[r] + 12.0 * sd;
    const int n = 20000;
    const double h = (hi - lo) / n;
    auto f = [&](double x) {
      const double lq = -0.5 * std::log(2 * std::numbers::pi * s[r]) -
                        0.5 * (x - mu[r]) * (x - mu[r]) / s[r];
      const double lp = -0.5 * std::log(2 * std::numbers::pi) - 0.5 * x * x;
      return std::exp(lq) * (lq - lp);
    };
    double acc = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    quad += acc * h / 3.0;
  }
  EXPECT_LT(rel_err(kl_diag_gaussian(mu, s), quad), 1e-6);
}

JitterPolicy exact_policy() {
  JitterPolicy j;
  j.try_unjittered = true;
  return j;
}

TEST(AssembleBound, EqualsExactMarginalLikelihoodAtInputs) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Index n = 10 + 8 * trial;
    const KernelParams p = params_for(2, 1.3, 0.9, 4.0 + trial);
    const Matrix X = random_matrix(n, 2, rng, 2.0);
    const Matrix Y = random_matrix(n, 2, rng);
    const InducingInputs Z(X);
    const PartialSums s = local_terms(Y, LatentPosterior::observed(X), Z, p);
    const double F = assemble_bound(s, Z, p, static_cast<std::uint64_t>(n), 2,
                                    exact_policy());
    EXPECT_LT(rel_err(F, oracle::exact_gp_lml(X, Y, p)), 1e-6) << "n=" << n;
  }
}

TEST(AssembleBound, BelowExactWithFewerInducingInputs) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 40;
    const KernelParams p = params_for(2, 1.0, 0.6, 10.0);
    const Matrix X = random_matrix(n, 2, rng, 1.5);
    const Matrix Y = random_matrix(n, 1, rng);
    const InducingInputs Z(random_matrix(8, 2, rng));
    const PartialSums s = local_terms(Y, LatentPosterior::observed(X), Z, p);
    const double F = assemble_bound(s, Z, p, 40, 1);
    EXPECT_LE(F, oracle::exact_gp_lml(X, Y, p) + 1e-8);
  }
}

TEST(AssembleBound, MatchesDirectEvaluation) {
  std::mt19937_64 rng(7);
  const KernelParams p = params_for(2, 1.1, 0.8, 5.0);
  const InducingInputs Z(random_matrix(5, 2, rng));
  const Matrix Y = random_matrix(15, 2, rng);
  const LatentPosterior lat = random_latents(15, 2, rng);
  const GlobalStep step = assemble_global(local_terms(Y, lat, Z, p), Z, p);
  const auto ref = oracle::naive_stats(Y, lat.means, lat.variances, false, Z.Z, p);
  EXPECT_LT(rel_err(step.value, oracle::naive_bound(ref, Z.Z, p, 15, step.jitter)),
            1e-10);

  // Replicating the output columns doubles every Y-dependent term.
  Matrix YY(15, 4);
  YY << Y, Y;
  const double F2 = assemble_global(local_terms(YY, lat, Z, p), Z, p).value;
  const auto ref2 = oracle::naive_stats(YY, lat.means, lat.variances, false, Z.Z, p);
  EXPECT_LT(rel_err(F2, oracle::naive_bound(ref2, Z.Z, p, 15, step.jitter)), 1e-10);
}

TEST(AssembleBound, ZeroOutputColumnAddsOnlyDataIndependentTerms) {
  std::mt19937_64 rng(8);
  const KernelParams p = params_for(2, 1.1, 0.8, 5.0);
  const InducingInputs Z(random_matrix(5, 2, rng));
  const Matrix Y = random_matrix(12, 2, rng);
  const LatentPosterior lat = random_latents(12, 2, rng);
  Matrix Y0(12, 3);
  Y0 << Y, Matrix::Zero(12, 1);
  const GlobalStep a = assemble_global(local_terms(Y, lat, Z, p), Z, p);
  const double b = assemble_global(local_terms(Y0, lat, Z, p), Z, p).value;
  // one extra output dimension contributes the Y-free terms once more
  auto s = oracle::naive_stats(Y, lat.means, lat.variances, false, Z.Z, p);
  Matrix Kmm = oracle::kernel(Z.Z, Z.Z, p);
  Kmm.diagonal().array() += a.jitter;
  const double beta = p.noise_precision;
  const Eigen::FullPivLU<Matrix> lk(Kmm), lp(Kmm + beta * s.D);
  const double per_dim = -0.5 * 12 * std::log(2 * std::numbers::pi) +
                         0.5 * 12 * std::log(beta) + 0.5 * std::log(lk.determinant()) -
                         0.5 * std::log(lp.determinant()) - 0.5 * beta * s.B +
                         0.5 * beta * (lk.inverse() * s.D).trace();
  EXPECT_LT(std::abs((b - a.value) - per_dim), 1e-9 * std::abs(a.value));
}

// Flattened parameter vector for finite differences:
// Z (row-major), log alpha, log sf2, log beta, means, log variances.
struct Instance {
  Matrix Y;
  LatentPosterior lat;
  InducingInputs Z;
  KernelParams p;
};

Vector pack(const Instance& in) {
  const Index m = in.Z.size(), q = in.Z.dim(), n = in.lat.size();
  const bool local = !in.lat.frozen;
  Vector v(m * q + q + 2 + (local ? 2 * n * q : 0));
  Index k = 0;
  for (Index j = 0; j < m; ++j)
    for (Index r = 0; r < q; ++r) v[k++] = in.Z.Z(j, r);
  for (Index r = 0; r < q; ++r) v[k++] = std::log(in.p.ard_weights[r]);
  v[k++] = std::log(in.p.signal_variance);
  v[k++] = std::log(in.p.noise_precision);
  if (local) {
    for (Index i = 0; i < n; ++i)
      for (Index r = 0; r < q; ++r) v[k++] = in.lat.means(i, r);
    for (Index i = 0; i < n; ++i)
      for (Index r = 0; r < q; ++r) v[k++] = std::log(in.lat.variances(i, r));
  }
  return v;
}

Instance unpack(const Instance& base, const Vector& v) {
  Instance in = base;
  const Index m = in.Z.size(), q = in.Z.dim(), n = in.lat.size();
  Index k = 0;
  for (Index j = 0; j < m; ++j)
    for (Index r = 0; r < q; ++r) in.Z.Z(j, r) = v[k++];
  for (Index r = 0; r < q; ++r) in.p.ard_weights[r] = std::exp(v[k++]);
  in.p.signal_variance = std::exp(v[k++]);
  in.p.noise_precision = std::exp(v[k++]);
  if (!in.lat.frozen) {
    for (Index i = 0; i < n; ++i)
      for (Index r = 0; r < q; ++r) in.lat.means(i, r) = v[k++];
    for (Index i = 0; i < n; ++i)
      for (Index r = 0; r < q; ++r) in.lat.variances(i, r) = std::exp(v[k++]);
  }
  return in;
}

Vector analytic_gradient(const Instance& in, double* value = nullptr) {
  const std::vector<Block> blocks{{in.Y, in.lat}};
  const BoundReport rep = evaluate_blocks(blocks, in.Z, in.p);
  if (value) *value = rep.value;
  const Index m = in.Z.size(), q = in.Z.dim(), n = in.lat.size();
  const bool local = !in.lat.frozen;
  Vector g(m * q + q + 2 + (local ? 2 * n * q : 0));
  Index k = 0;
  const auto& kg = rep.grad_global.kernel;
  for (Index j = 0; j < m; ++j)
    for (Index r = 0; r < q; ++r) g[k++] = kg.Z(j, r);
  for (Index r = 0; r < q; ++r) g[k++] = kg.log_ard_weights[r];
  g[k++] = kg.log_signal_variance;
  g[k++] = rep.grad_global.log_noise_precision;
  if (local) {
    for (Index i = 0; i < n; ++i)
      for (Index r = 0; r < q; ++r) g[k++] = rep.local[0].d_means(i, r);
    for (Index i = 0; i < n; ++i)
      for (Index r = 0; r < q; ++r) g[k++] = rep.local[0].d_log_variances(i, r);
  } else {
    EXPECT_EQ(rep.local[0].d_means.size(), 0);
    EXPECT_EQ(rep.local[0].d_log_variances.size(), 0);
  }
  return g;
}

void expect_gradient_matches(const Instance& in, double tol) {
  const Vector x = pack(in);
  const Vector g = analytic_gradient(in);
  const Vector fd = oracle::central_difference(
      [&](const Vector& v) {
        const Instance u = unpack(in, v);
        const std::vector<Block> blocks{{u.Y, u.lat}};
        return evaluate_blocks(blocks, u.Z, u.p).value;
      },
      x, 1e-5);
  const Index m = in.Z.size(), q = in.Z.dim(), n = in.lat.size();
  struct Group {
    const char* name;
    Index begin, size;
  };
  std::vector<Group> groups{{"Z", 0, m * q},
                            {"log alpha", m * q, q},
                            {"log sf2", m * q + q, 1},
                            {"log beta", m * q + q + 1, 1}};
  if (!in.lat.frozen) {
    groups.push_back({"mu", m * q + q + 2, n * q});
    groups.push_back({"log S", m * q + q + 2 + n * q, n * q});
  }
  for (const Group& gr : groups) {
    const Vector a = g.segment(gr.begin, gr.size);
    const Vector b = fd.segment(gr.begin, gr.size);
    const double err = (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
    EXPECT_LT(err, tol) << gr.name << "\nanalytic " << a.transpose()
                        << "\nfd       " << b.transpose();
  }
}

TEST(AssembleGradients, LatentModeMatchesFiniteDifferences) {
  for (std::uint64_t seed : {9u, 10u, 11u}) {
    std::mt19937_64 rng(seed);
    Instance in{random_matrix(12, 2, rng), random_latents(12, 2, rng),
                InducingInputs(random_matrix(4, 2, rng)),
                params_for(2, 1.2, 0.7, 3.0)};
    in.p.ard_weights[1] = 1.6;
    expect_gradient_matches(in, 1e-4);
  }
}

TEST(AssembleGradients, RegressionModeMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  Instance in{random_matrix(12, 2, rng),
              LatentPosterior::observed(random_matrix(12, 2, rng)),
              InducingInputs(random_matrix(4, 2, rng)),
              params_for(2, 0.8, 1.3, 6.0)};
  expect_gradient_matches(in, 1e-4);
}

TEST(AssembleGradients, MirroredClustersCancelAtOrigin) {
  // Two clusters mirrored through the origin, with mirrored outputs; the
  // inducing inputs sit symmetrically so the Z gradient is antisymmetric.
  std::mt19937_64 rng(13);
  const Matrix half = random_matrix(6, 2, rng, 0.3).rowwise() + RowVector::Constant(2, 2.0);
  Matrix X(12, 2);
  X << half, -half;
  Matrix Y(12, 1);
  const Matrix yh = random_matrix(6, 1, rng);
  Y << yh, yh;
  Matrix z(2, 2);
  z << 0.5, 0.5, -0.5, -0.5;
  Instance in{Y, LatentPosterior::observed(X), InducingInputs(z),
              params_for(2, 1.0, 0.5, 4.0)};
  const Vector g = analytic_gradient(in);
  // dF/dZ_0 = -dF/dZ_1 by the point symmetry x -> -x
  EXPECT_NEAR(g[0], -g[2], 1e-10 * g.head(4).cwiseAbs().maxCoeff());
  EXPECT_NEAR(g[1], -g[3], 1e-10 * g.head(4).cwiseAbs().maxCoeff());
  expect_gradient_matches(in, 1e-4);

  // Z at the origin: the single inducing input gradient cancels.
  Instance centred{Y, LatentPosterior::observed(X),
                   InducingInputs(Matrix::Zero(1, 2)), params_for(2, 1.0, 0.5, 4.0)};
  const Vector gc = analytic_gradient(centred);
  EXPECT_LT(gc.head(2).cwiseAbs().maxCoeff(), 1e-10 * gc.cwiseAbs().maxCoeff());
  const Vector fd = oracle::central_difference(
      [&](const Vector& v) {
        const Instance u = unpack(centred, v);
        const std::vector<Block> blocks{{u.Y, u.lat}};
        return evaluate_blocks(blocks, u.Z, u.p).value;
      },
      pack(centred), 1e-5);
  EXPECT_LT(fd.head(2).cwiseAbs().maxCoeff(), 1e-6 * fd.cwiseAbs().maxCoeff());
}

TEST(AssembleGradients, PartitionInvariance) {
  std::mt19937_64 rng(14);
  const KernelParams p = params_for(2, 1.2, 0.7, 3.0);
  const InducingInputs Z(random_matrix(5, 2, rng));
  const Matrix Y = random_matrix(23, 2, rng);
  const LatentPosterior lat = random_latents(23, 2, rng);
  const auto one = split_blocks(Y, lat, {23});
  const auto many = split_blocks(Y, lat, {6, 6, 6, 5});
  const BoundReport a = evaluate_blocks(one, Z, p);
  const BoundReport b = evaluate_blocks(many, Z, p);
  EXPECT_LT(rel_err(b.value, a.value), 1e-12);
  EXPECT_LT(rel_err(b.grad_global.kernel.Z, a.grad_global.kernel.Z), 1e-12);
  EXPECT_LT(rel_err(b.grad_global.kernel.log_ard_weights,
                    a.grad_global.kernel.log_ard_weights), 1e-12);
  EXPECT_LT(rel_err(b.grad_global.kernel.log_signal_variance,
                    a.grad_global.kernel.log_signal_variance), 1e-12);
  EXPECT_LT(rel_err(b.grad_global.log_noise_precision,
                    a.grad_global.log_noise_precision), 1e-12);
  // same blocks, same order: bit-identical
  const BoundReport c = evaluate_blocks(many, Z, p);
  EXPECT_EQ(b.value, c.value);
}

TEST(AssembleBound, RejectsCountMismatch) {
  std::mt19937_64 rng(15);
  const KernelParams p = params_for(1, 1.0, 1.0, 1.0);
  const InducingInputs Z(random_matrix(2, 1, rng));
  const Matrix X = random_matrix(3, 1, rng);
  const PartialSums s = local_terms(random_matrix(3, 1, rng),
                                    LatentPosterior::observed(X), Z, p);
  EXPECT_THROW(assemble_bound(s, Z, p, 4, 1), InvalidInput);
}

TEST(AssembleBound, FactorizationFailureIsReported) {
  KernelParams p = params_for(1, 1.0, 1.0, 1.0);
  Matrix z(2, 1);
  z << 0.0, 1e-12;  // numerically identical inducing inputs
  JitterPolicy none;
  none.base = 0.0;
  none.max = 0.0;
  const PartialSums s = PartialSums::zeros(2, 1);
  EXPECT_THROW(assemble_global(s, InducingInputs(z), p, none), FactorizationError);
  // the default schedule rescues it
  EXPECT_NO_THROW(assemble_global(s, InducingInputs(z), p));
}

}  // namespace
}  // namespace dgp
