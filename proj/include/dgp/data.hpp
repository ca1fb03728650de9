#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dgp/kernel.hpp"

namespace dgp {

/// Per-column affine map applied to a matrix: (x - mean) / scale.  Columns
/// with zero spread are left untouched and flagged.
struct Standardization {
  RowVector mean;
  RowVector scale;
  std::vector<bool> constant;

  Matrix apply(const Matrix& M) const;
  Matrix invert(const Matrix& M) const;
};

struct Dataset {
  Matrix X;  // n x q inputs; q == 0 when the dataset has no inputs
  Matrix Y;  // n x d outputs
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;
  std::optional<Standardization> input_standardization;
  std::optional<Standardization> output_standardization;
  std::size_t dropped_rows = 0;

  Index size() const { return Y.rows(); }
  bool has_inputs() const { return X.cols() > 0; }
};

struct CsvOptions {
  // Column names when `header` is set, otherwise 0-based column indices.
  // Empty outputs means every column that is not an input.
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  bool header = true;
  // Output values are divided by this at ingestion (255 for pixel data).
  double output_divisor = 1.0;
  std::ostream* warnings = nullptr;  // defaults to std::cerr
};

// Reads a comma-separated file.  Lines starting with '#' are comments.  Rows
// with a missing, unparseable or non-finite selected field are dropped and
// counted.  Throws InvalidInput when no usable rows remain.
Dataset load_csv(const std::string& path, const CsvOptions& options);

// Writes X columns then Y columns with round-trip precision.  `comments` are
// emitted first, each prefixed with "# ".
void write_csv(const std::string& path, const Dataset& data,
               const std::vector<std::string>& comments = {});

// "DGPD" binary format: magic, u16 version, u64 n, u64 q, u64 d, then X
// (absent when q == 0) and Y as row-major little-endian doubles.
inline constexpr std::uint16_t kDatasetVersion = 1;
std::vector<std::uint8_t> encode_dataset(const Matrix& X, const Matrix& Y);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void save_binary(const std::string& path, const Dataset& data);
Dataset load_binary(const std::string& path);

// Binary when the file starts with the DGPD magic, CSV otherwise.
Dataset load_dataset(const std::string& path, const CsvOptions& options);

Dataset take_rows(const Dataset& data, std::span<const Index> rows);

enum class SplitStrategy { kRandom, kHead };

struct SplitOptions {
  SplitStrategy strategy = SplitStrategy::kRandom;
  // kHead: only the first head_rows rows take part (0 = all); the rest are
  // discarded before the seeded split.
  std::size_t head_rows = 0;
};

// Seeded train/test split.  Both halves keep file order.
std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t n_test,
                                  std::uint64_t seed,
                                  const SplitOptions& options = {});

// x ~ N(0, 1), Y = [sin(2x), cos(3x), x^2 / 2] + N(0, noise_std^2 I).
// The latent x is kept as the dataset's single input column.
Dataset synth_latent_1d(std::size_t n, std::uint64_t seed, double noise_std);

// x ~ U(-3, 3), y = sin(2x) + 0.5 cos(5x) + N(0, noise_std^2).
Dataset synth_regression(std::size_t n, std::uint64_t seed, double noise_std);

// Two classes in `dim` dimensions, each a noisy 1-D curve around its own
// centre; the centres are `separation` apart.  Returns one dataset per class.
std::vector<Dataset> synth_two_class(std::size_t n_per_class, Index dim,
                                     double separation, std::uint64_t seed);

// Standardizes the selected blocks and records the maps for inversion.
Dataset standardize(const Dataset& data, bool inputs = true,
                    bool outputs = true);
Dataset destandardize(const Dataset& data);

}  // namespace dgp
