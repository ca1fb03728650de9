#include <gtest/gtest.h>

#include <sstream>

#include "dgp/bench.hpp"

namespace dgp {
namespace {

BenchWorkload small(Index n = 1200) {
  BenchWorkload w;
  w.n = n;
  w.m = 15;
  return w;
}

BenchConfig quick(std::size_t iters = 10) {
  BenchConfig c;
  c.iters = iters;
  return c;
}

std::size_t count_lines(const std::string& s, char first) {
  std::istringstream in(s);
  std::size_t k = 0;
  for (std::string line; std::getline(in, line);) k += !line.empty() && line[0] == first;
  return k;
}

TEST(Median, OddEvenAndEmpty) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_EQ(median({}), 0.0);
}

TEST(Bench, StrongRowsShareTheBound) {
  const std::vector<std::size_t> counts{1, 2, 4};
  const ScalingReport r = bench_strong(small(), counts, quick());
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[0].speedup, 1.0);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.samples.size(), 10u);
    EXPECT_GT(row.median_wall, 0.0);
    EXPECT_GE(row.median_global, 0.0);
    EXPECT_LE(row.median_worker_min, row.median_worker_max);
    EXPECT_LE(std::abs(row.bound - r.rows[0].bound), 1e-10 * std::abs(r.rows[0].bound));
  }
  EXPECT_EQ(r.kind, "strong");
  EXPECT_FALSE(r.machine.empty());
}

TEST(Bench, SingleWorkerHasNoSpread) {
  const ScalingReport r = bench_load(small(), 1, quick());
  const BenchRow& row = r.rows.at(0);
  for (const auto& s : row.samples) {
    EXPECT_EQ(s.worker_min, s.worker_max);
    EXPECT_EQ(s.worker_min, s.worker_mean);
    EXPECT_EQ(s.imbalance(), 0.0);
  }
}

TEST(Bench, UnbalancedPartitionsShowImbalance) {
  const ScalingReport balanced = bench_load(small(4000), 4, quick());
  BenchConfig c = quick();
  c.unbalanced = true;
  const ScalingReport skewed = bench_load(small(4000), 4, c);
  EXPECT_GT(skewed.rows[0].median_imbalance, balanced.rows[0].median_imbalance);
  // first worker owns half the rows, the rest a sixth each
  EXPECT_GT(skewed.rows[0].median_imbalance, 0.6);
}

TEST(Bench, WeakScalesRowsAndWorkers) {
  const std::vector<std::size_t> scales{1, 2};
  const ScalingReport r = bench_weak(small(600), 1, scales, quick());
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[1].n, 1200);
  EXPECT_EQ(r.rows[1].workers, 2u);
  EXPECT_EQ(r.rows[0].speedup, 1.0);
  const double ratio = r.rows[1].bound / r.rows[0].bound;
  EXPECT_GT(ratio, 1.5);
  EXPECT_LT(ratio, 2.5);
}

TEST(Bench, GlobalSweepAndReports) {
  const std::vector<Index> sizes{500, 1000};
  const ScalingReport r = bench_global(small(), sizes, 2, quick());
  ASSERT_EQ(r.rows.size(), 2u);
  std::ostringstream csv;
  write_csv(csv, r);
  EXPECT_EQ(count_lines(csv.str(), 'g'), 2u);  // rows start with the kind
  EXPECT_GE(count_lines(csv.str(), '#'), 10u);
  EXPECT_NE(csv.str().find("# m: 15"), std::string::npos);
  std::ostringstream samples;
  write_samples_csv(samples, r);
  EXPECT_EQ(count_lines(samples.str(), 'g'), 20u);
  std::ostringstream table;
  write_table(table, r);
  EXPECT_NE(table.str().find("speedup"), std::string::npos);
}

TEST(Bench, RejectsEmptySweeps) {
  EXPECT_THROW(bench_strong(small(), {}, quick()), InvalidInput);
  EXPECT_THROW(bench_load(small(), 1, quick(0)), InvalidInput);
}

}  // namespace
}  // namespace dgp
