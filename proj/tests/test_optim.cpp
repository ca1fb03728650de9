#include <gtest/gtest.h>

#include <cmath>

#include "dgp/optim.hpp"

namespace dgp {
namespace {

Objective quadratic(const Vector& a) {
  return [a](const Vector& x, Vector& g) {
    g = x - a;
    return 0.5 * g.squaredNorm();
  };
}

double rosen(const Vector& x, Vector& g) {
  const double a = 1.0 - x[0];
  const double b = x[1] - x[0] * x[0];
  g[0] = -2.0 * a - 400.0 * x[0] * b;
  g[1] = 200.0 * b;
  return a * a + 100.0 * b * b;
}

bool monotone(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1]) return false;
  }
  return true;
}

class BothMethods : public ::testing::TestWithParam<Method> {};

TEST_P(BothMethods, ConvexQuadratic) {
  const Vector a = (Vector(2) << 3.0, -2.0).finished();
  OptimizerConfig c;
  c.max_evals = 50;
  c.grad_tol = 1e-12;
  const OptimResult r = minimize(GetParam(), quadratic(a), Vector::Zero(2), c);
  EXPECT_LT((r.x - a).norm(), GetParam() == Method::kLbfgs ? 1e-10 : 1e-8);
  EXPECT_LE(r.evals, 50u);
  EXPECT_TRUE(monotone(r.accepted));
}

TEST_P(BothMethods, IllConditionedQuadratic) {
  const Vector scale = (Vector(5) << 1, 10, 100, 1000, 1e4).finished();
  const Objective f = [&](const Vector& x, Vector& g) {
    g = scale.cwiseProduct(x - Vector::Ones(5));
    return 0.5 * (x - Vector::Ones(5)).dot(g);
  };
  OptimizerConfig c;
  c.max_evals = 2000;
  c.grad_tol = 1e-9;
  const OptimResult r = minimize(GetParam(), f, Vector::Zero(5), c);
  EXPECT_LT((r.x - Vector::Ones(5)).norm(), 1e-8);
  EXPECT_TRUE(r.converged());
}

TEST_P(BothMethods, ReturnsImmediatelyAtStationaryPoint) {
  const Vector a = Vector::Constant(3, 1.5);
  OptimizerConfig c;
  c.grad_tol = 1e-6;
  const OptimResult r = minimize(GetParam(), quadratic(a), a, c);
  EXPECT_EQ(r.evals, 1u);
  EXPECT_EQ(r.x, a);
  EXPECT_EQ(r.reason, StopReason::kGradTol);
}

TEST_P(BothMethods, Deterministic) {
  const Vector x0 = (Vector(2) << -1.2, 1.0).finished();
  OptimizerConfig c;
  c.max_evals = 100;
  const OptimResult a = minimize(GetParam(), rosen, x0, c);
  const OptimResult b = minimize(GetParam(), rosen, x0, c);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.x, b.x);
}

TEST_P(BothMethods, RespectsBudgetAndTrace) {
  const Vector x0 = (Vector(2) << -1.2, 1.0).finished();
  OptimizerConfig c;
  c.max_evals = 7;
  const OptimResult r = minimize(GetParam(), rosen, x0, c);
  EXPECT_LE(r.evals, 7u);
  EXPECT_EQ(r.trace.size(), r.evals);
  EXPECT_LE(r.value, r.trace.front());
  EXPECT_TRUE(monotone(r.accepted));
}

TEST_P(BothMethods, BacksOffFromInfeasibleRegion) {
  // log barrier: infinite for x <= 0, minimum at x = 1
  const Objective f = [](const Vector& x, Vector& g) {
    if (x[0] <= 0.0) {
      g.setZero();
      return std::numeric_limits<double>::infinity();
    }
    g[0] = 1.0 - 1.0 / x[0];
    return x[0] - std::log(x[0]);
  };
  OptimizerConfig c;
  c.max_evals = 200;
  c.grad_tol = 1e-8;
  const OptimResult r = minimize(GetParam(), f, Vector::Constant(1, 20.0), c);
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
}

TEST_P(BothMethods, RejectsNonFiniteStart) {
  const Objective f = [](const Vector&, Vector& g) {
    g.setZero();
    return std::nan("");
  };
  EXPECT_THROW(minimize(GetParam(), f, Vector::Zero(2), {}), InvalidInput);
}

INSTANTIATE_TEST_SUITE_P(Optim, BothMethods,
                         ::testing::Values(Method::kScg, Method::kLbfgs),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Lbfgs, Rosenbrock) {
  OptimizerConfig c;
  c.max_evals = 200;
  c.grad_tol = 1e-10;
  c.obj_tol = 0.0;
  const OptimResult r = lbfgs(rosen, (Vector(2) << -1.2, 1.0).finished(), c);
  EXPECT_LT(r.value, 1e-8);
  EXPECT_LE(r.evals, 200u);
  EXPECT_TRUE(monotone(r.accepted));
}

TEST(Scg, Rosenbrock) {
  OptimizerConfig c;
  c.max_evals = 2000;
  c.grad_tol = 1e-10;
  c.obj_tol = 0.0;
  const OptimResult r = scg(rosen, (Vector(2) << -1.2, 1.0).finished(), c);
  EXPECT_LT(r.value, 1e-6);
  EXPECT_TRUE(monotone(r.accepted));
}

TEST(Config, Validation) {
  OptimizerConfig c;
  c.max_evals = 0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c.max_evals = 1;
  c.grad_tol = -1;
  EXPECT_THROW(c.validate(), InvalidInput);
  EXPECT_EQ(parse_method("scg"), Method::kScg);
  EXPECT_THROW(parse_method("adam"), InvalidInput);
}

}  // namespace
}  // namespace dgp
