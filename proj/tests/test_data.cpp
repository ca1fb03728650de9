#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dgp/data.hpp"

namespace dgp {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("dgp_data_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

TEST(Csv, WellFormedFile) {
  TempDir dir;
  const auto path = dir.file("a.csv");
  write_text(path, "x,y\n1.5,2\n-3,4e-2\n0.25,7\n");
  CsvOptions opt;
  opt.inputs = {"x"};
  opt.outputs = {"y"};
  const Dataset ds = load_csv(path, opt);
  ASSERT_EQ(ds.size(), 3);
  EXPECT_EQ(ds.X(0, 0), 1.5);
  EXPECT_EQ(ds.X(1, 0), -3.0);
  EXPECT_EQ(ds.Y(1, 0), 0.04);
  EXPECT_EQ(ds.Y(2, 0), 7.0);
  EXPECT_EQ(ds.dropped_rows, 0u);
}

TEST(Csv, EmptyFieldDropsRow) {
  TempDir dir;
  const auto path = dir.file("a.csv");
  write_text(path, "x,y\n1,2\n,3\n4,5\n");
  CsvOptions opt;
  opt.inputs = {"x"};
  std::ostringstream warn;
  opt.warnings = &warn;
  const Dataset ds = load_csv(path, opt);
  EXPECT_EQ(ds.size(), 2);
  EXPECT_EQ(ds.dropped_rows, 1u);
  EXPECT_NE(warn.str().find("dropped 1"), std::string::npos);
  EXPECT_EQ(ds.X(1, 0), 4.0);
}

TEST(Csv, GarbageAndNonFiniteFieldsDropRows) {
  TempDir dir;
  const auto path = dir.file("a.csv");
  write_text(path, "# comment\nx,y\n1,abc\n2,nan\n3,inf\n4,1.0x\n5,6\n");
  CsvOptions opt;
  opt.inputs = {"x"};
  std::ostringstream warn;
  opt.warnings = &warn;
  const Dataset ds = load_csv(path, opt);
  EXPECT_EQ(ds.size(), 1);
  EXPECT_EQ(ds.dropped_rows, 4u);
}

TEST(Csv, QuotedFieldsAndUnusedColumns) {
  TempDir dir;
  const auto path = dir.file("a.csv");
  write_text(path, "name,x,\"y\"\n\"a, b\",1,\"2.5\"\r\n\"c\"\"d\",3,4\n");
  CsvOptions opt;
  opt.inputs = {"x"};
  opt.outputs = {"y"};
  const Dataset ds = load_csv(path, opt);
  ASSERT_EQ(ds.size(), 2);
  EXPECT_EQ(ds.Y(0, 0), 2.5);
  EXPECT_EQ(ds.X(1, 0), 3.0);
}

TEST(Csv, HeaderlessIndicesAndDivisor) {
  TempDir dir;
  const auto path = dir.file("a.csv");
  write_text(path, "255,0\n51,102\n");
  CsvOptions opt;
  opt.header = false;
  opt.output_divisor = 255.0;
  const Dataset ds = load_csv(path, opt);
  EXPECT_FALSE(ds.has_inputs());
  ASSERT_EQ(ds.Y.cols(), 2);
  EXPECT_EQ(ds.Y(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(ds.Y(1, 1), 0.4);
}

TEST(Csv, Errors) {
  TempDir dir;
  const auto path = dir.file("a.csv");
  write_text(path, "x,y\n,1\n");
  CsvOptions opt;
  opt.inputs = {"x"};
  std::ostringstream warn;
  opt.warnings = &warn;
  EXPECT_THROW(load_csv(path, opt), InvalidInput);
  opt.inputs = {"nope"};
  EXPECT_THROW(load_csv(path, opt), InvalidInput);
  EXPECT_THROW(load_csv(dir.file("missing.csv"), opt), InvalidInput);
}

TEST(Csv, RoundTripIsBitwise) {
  TempDir dir;
  Dataset ds = synth_latent_1d(50, 3, 0.1);
  ds.X(0, 0) = 0.1 + 0.2;
  ds.Y(1, 1) = 1e-300;
  const auto path = dir.file("rt.csv");
  write_csv(path, ds, {"seed 3"});
  CsvOptions opt;
  opt.inputs = {"latent"};
  const Dataset back = load_csv(path, opt);
  EXPECT_EQ(back.X, ds.X);
  EXPECT_EQ(back.Y, ds.Y);
  EXPECT_EQ(back.output_names, ds.output_names);
}

TEST(Binary, RoundTripAndMagicDispatch) {
  TempDir dir;
  const Dataset ds = synth_regression(20, 1, 0.1);
  const auto path = dir.file("d.bin");
  save_binary(path, ds);
  const Dataset back = load_dataset(path, {});
  EXPECT_EQ(back.X, ds.X);
  EXPECT_EQ(back.Y, ds.Y);

  const auto bytes = encode_dataset(Matrix(3, 0), Matrix::Ones(3, 2));
  EXPECT_EQ(bytes.size(), 4u + 2 + 24 + 6 * 8);
  const Dataset noin = decode_dataset(bytes);
  EXPECT_FALSE(noin.has_inputs());
  EXPECT_EQ(noin.size(), 3);
}

TEST(Binary, RejectsCorruptInput) {
  auto bytes = encode_dataset(Matrix::Ones(2, 1), Matrix::Ones(2, 1));
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_dataset(truncated), ProtocolError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_dataset(bad_magic), ProtocolError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(decode_dataset(bad_version), ProtocolError);
  bytes.push_back(0);
  EXPECT_THROW(decode_dataset(bytes), ProtocolError);
}

Dataset indexed(Index n) {
  Dataset ds;
  ds.X = Matrix(n, 1);
  ds.Y = Matrix(n, 1);
  for (Index i = 0; i < n; ++i) ds.X(i, 0) = ds.Y(i, 0) = static_cast<double>(i);
  return ds;
}

std::vector<Index> ids(const Dataset& ds) {
  std::vector<Index> out;
  for (Index i = 0; i < ds.size(); ++i) out.push_back(static_cast<Index>(ds.X(i, 0)));
  return out;
}

TEST(Split, ReproducibleDisjointExhaustive) {
  const Dataset ds = indexed(10);
  const auto [train, test] = split(ds, 3, 42);
  const auto [train2, test2] = split(ds, 3, 42);
  EXPECT_EQ(ids(test), ids(test2));
  EXPECT_EQ(ids(train), ids(train2));
  EXPECT_EQ(test.size(), 3);
  std::set<Index> all;
  for (auto i : ids(train)) all.insert(i);
  for (auto i : ids(test)) all.insert(i);
  EXPECT_EQ(all.size(), 10u);
  const auto test_ids = ids(test);
  EXPECT_TRUE(std::is_sorted(test_ids.begin(), test_ids.end()));
}

TEST(Split, SeedsGiveDifferentTestSets) {
  const Dataset ds = indexed(1000);
  EXPECT_NE(ids(split(ds, 100, 1).second), ids(split(ds, 100, 2).second));
}

TEST(Split, HeadTakesPrefixFirst) {
  const Dataset ds = indexed(100);
  SplitOptions opt;
  opt.strategy = SplitStrategy::kHead;
  opt.head_rows = 20;
  const auto [train, test] = split(ds, 5, 7, opt);
  EXPECT_EQ(train.size() + test.size(), 20);
  for (auto i : ids(train)) EXPECT_LT(i, 20);
  for (auto i : ids(test)) EXPECT_LT(i, 20);
}

TEST(Split, TestSizeMustLeaveTrainingRows) {
  EXPECT_THROW(split(indexed(10), 10, 1), InvalidInput);
}

TEST(Synth, Latent1dMatchesFormula) {
  const Dataset ds = synth_latent_1d(5, 11, 0.0);
  const Dataset again = synth_latent_1d(5, 11, 0.0);
  EXPECT_EQ(ds.Y, again.Y);
  for (Index i = 0; i < 5; ++i) {
    const double x = ds.X(i, 0);
    EXPECT_EQ(ds.Y(i, 0), std::sin(2 * x));
    EXPECT_EQ(ds.Y(i, 1), std::cos(3 * x));
    EXPECT_EQ(ds.Y(i, 2), 0.5 * x * x);
    EXPECT_GE(ds.Y(i, 2), 0.0);
  }
}

TEST(Synth, LatentMoments) {
  const std::size_t n = 20000;
  const Dataset ds = synth_latent_1d(n, 5, 0.1);
  EXPECT_LT(std::abs(ds.X.mean()), 4.0 / std::sqrt(double(n)));
  const double var = (ds.X.array() - ds.X.mean()).square().mean();
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Synth, TwoClassShapes) {
  const auto classes = synth_two_class(30, 4, 3.0, 2);
  ASSERT_EQ(classes.size(), 2u);
  EXPECT_EQ(classes[1].Y.rows(), 30);
  EXPECT_EQ(classes[1].Y.cols(), 4);
  EXPECT_GT(classes[1].Y.col(0).mean() - classes[0].Y.col(0).mean(), 1.5);
}

TEST(Standardize, InverseAndConstantColumns) {
  Dataset ds = synth_regression(100, 4, 0.1);
  ds.Y.conservativeResize(Eigen::NoChange, 2);
  ds.Y.col(1).setConstant(3.5);
  const Dataset s = standardize(ds);
  EXPECT_NEAR(s.X.mean(), 0.0, 1e-12);
  EXPECT_NEAR((s.X.array().square().mean()), 1.0, 1e-12);
  EXPECT_TRUE(s.output_standardization->constant[1]);
  EXPECT_EQ(s.Y.col(1), ds.Y.col(1));
  const Dataset back = destandardize(s);
  EXPECT_LT((back.X - ds.X).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((back.Y - ds.Y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Standardize, AlreadyStandardIsIdentity) {
  const Dataset s = standardize(synth_regression(100, 4, 0.1));
  const Dataset twice = standardize(s);
  EXPECT_LT((twice.X - s.X).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((twice.Y - s.Y).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace
}  // namespace dgp
