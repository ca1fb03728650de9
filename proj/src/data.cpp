#include "dgp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "dgp/bytes.hpp"

namespace dgp {

namespace {

constexpr std::string_view kMagic = "DGPD";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_double(const std::string& field) {
  const std::string s = trim(field);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::size_t resolve_column(const std::string& name,
                           const std::vector<std::string>& header,
                           bool have_header, std::size_t ncols) {
  if (have_header) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InvalidInput("no column named '" + name + "'");
    return static_cast<std::size_t>(std::distance(header.begin(), it));
  }
  std::size_t idx = 0;
  const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), idx);
  if (ec != std::errc() || ptr != name.data() + name.size() || idx >= ncols) {
    throw InvalidInput("bad column index '" + name + "'");
  }
  return idx;
}

Standardization fit_standardization(const Matrix& M) {
  Standardization s;
  const double n = static_cast<double>(M.rows());
  s.mean = M.colwise().mean();
  s.scale = RowVector::Ones(M.cols());
  s.constant.assign(static_cast<std::size_t>(M.cols()), false);
  for (Index c = 0; c < M.cols(); ++c) {
    const double var = (M.col(c).array() - s.mean[c]).square().sum() / n;
    if (var > 0.0) {
      s.scale[c] = std::sqrt(var);
    } else {
      s.constant[static_cast<std::size_t>(c)] = true;
      s.mean[c] = 0.0;
    }
  }
  return s;
}

}  // namespace

Matrix Standardization::apply(const Matrix& M) const {
  if (M.cols() != mean.size()) throw DimensionError("standardization column mismatch");
  Matrix out = M;
  for (Index c = 0; c < M.cols(); ++c) {
    if (constant[static_cast<std::size_t>(c)]) continue;
    out.col(c) = (M.col(c).array() - mean[c]) / scale[c];
  }
  return out;
}

Matrix Standardization::invert(const Matrix& M) const {
  if (M.cols() != mean.size()) throw DimensionError("standardization column mismatch");
  Matrix out = M;
  for (Index c = 0; c < M.cols(); ++c) {
    if (constant[static_cast<std::size_t>(c)]) continue;
    out.col(c) = M.col(c).array() * scale[c] + mean[c];
  }
  return out;
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::ostream& warn = options.warnings ? *options.warnings : std::cerr;

  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  bool header_read = !options.header;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (!header_read) {
      for (auto& f : fields) f = trim(f);
      header = std::move(fields);
      header_read = true;
      continue;
    }
    rows.push_back(std::move(fields));
  }
  const std::size_t ncols = options.header ? header.size()
                                           : (rows.empty() ? 0 : rows.front().size());

  std::vector<std::size_t> in_idx, out_idx;
  for (const auto& name : options.inputs) {
    in_idx.push_back(resolve_column(name, header, options.header, ncols));
  }
  if (options.outputs.empty()) {
    for (std::size_t c = 0; c < ncols; ++c) {
      if (std::find(in_idx.begin(), in_idx.end(), c) == in_idx.end()) {
        out_idx.push_back(c);
      }
    }
  } else {
    for (const auto& name : options.outputs) {
      out_idx.push_back(resolve_column(name, header, options.header, ncols));
    }
  }
  if (out_idx.empty()) throw InvalidInput("no output columns selected");

  Dataset ds;
  auto column_name = [&](std::size_t c) {
    return options.header ? header[c] : std::to_string(c);
  };
  for (auto c : in_idx) ds.input_names.push_back(column_name(c));
  for (auto c : out_idx) ds.output_names.push_back(column_name(c));

  std::vector<double> xs, ys;
  std::size_t kept = 0;
  std::size_t line_no = options.header ? 1 : 0;
  for (const auto& fields : rows) {
    ++line_no;
    bool ok = true;
    std::vector<double> xrow, yrow;
    auto grab = [&](const std::vector<std::size_t>& idx, std::vector<double>& dst) {
      for (auto c : idx) {
        std::optional<double> v;
        if (c < fields.size()) v = parse_double(fields[c]);
        if (!v) {
          ok = false;
          return;
        }
        dst.push_back(*v);
      }
    };
    grab(in_idx, xrow);
    if (ok) grab(out_idx, yrow);
    if (!ok) {
      if (ds.dropped_rows < 5) {
        warn << "warning: " << path << ": dropping data row " << line_no
             << " (missing or unparseable field)\n";
      }
      ++ds.dropped_rows;
      continue;
    }
    xs.insert(xs.end(), xrow.begin(), xrow.end());
    ys.insert(ys.end(), yrow.begin(), yrow.end());
    ++kept;
  }
  if (ds.dropped_rows > 0) {
    warn << "warning: " << path << ": dropped " << ds.dropped_rows
         << " incomplete row(s)\n";
  }
  if (kept == 0) throw InvalidInput("'" + path + "' has no usable rows");

  const auto n = static_cast<Index>(kept);
  const auto q = static_cast<Index>(in_idx.size());
  const auto d = static_cast<Index>(out_idx.size());
  ds.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(xs.data(), n, q);
  ds.Y = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(ys.data(), n, d);
  if (options.output_divisor != 1.0) ds.Y /= options.output_divisor;
  return ds;
}

void write_csv(const std::string& path, const Dataset& data,
               const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  for (const auto& c : comments) out << "# " << c << '\n';
  std::vector<std::string> names;
  for (Index c = 0; c < data.X.cols(); ++c) {
    names.push_back(static_cast<std::size_t>(c) < data.input_names.size()
                        ? data.input_names[static_cast<std::size_t>(c)]
                        : fmt::format("x{}", c));
  }
  for (Index c = 0; c < data.Y.cols(); ++c) {
    names.push_back(static_cast<std::size_t>(c) < data.output_names.size()
                        ? data.output_names[static_cast<std::size_t>(c)]
                        : fmt::format("y{}", c));
  }
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  std::string row;
  for (Index i = 0; i < data.size(); ++i) {
    row.clear();
    for (Index c = 0; c < data.X.cols(); ++c) {
      row += fmt::format("{}{}", c ? "," : "", data.X(i, c));
    }
    for (Index c = 0; c < data.Y.cols(); ++c) {
      row += fmt::format("{}{}", (c || data.X.cols()) ? "," : "", data.Y(i, c));
    }
    out << row << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<std::uint8_t> encode_dataset(const Matrix& X, const Matrix& Y) {
  if (X.cols() > 0 && X.rows() != Y.rows()) {
    throw DimensionError("inputs and outputs differ in row count");
  }
  ByteWriter w;
  w.bytes(kMagic);
  w.u16(kDatasetVersion);
  w.u64(static_cast<std::uint64_t>(Y.rows()));
  w.u64(static_cast<std::uint64_t>(X.cols()));
  w.u64(static_cast<std::uint64_t>(Y.cols()));
  if (X.cols() > 0) w.matrix(X);
  w.matrix(Y);
  return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != kMagic) throw ProtocolError("not a DGPD dataset");
  const auto version = r.u16();
  if (version != kDatasetVersion) {
    throw ProtocolError("unsupported DGPD version " + std::to_string(version));
  }
  const auto n = static_cast<Index>(r.u64());
  const auto q = static_cast<Index>(r.u64());
  const auto d = static_cast<Index>(r.u64());
  Dataset ds;
  ds.X = q > 0 ? r.matrix(n, q) : Matrix(n, 0);
  ds.Y = r.matrix(n, d);
  r.expect_end();
  for (Index c = 0; c < q; ++c) ds.input_names.push_back(fmt::format("x{}", c));
  for (Index c = 0; c < d; ++c) ds.output_names.push_back(fmt::format("y{}", c));
  return ds;
}

void save_binary(const std::string& path, const Dataset& data) {
  const auto bytes = encode_dataset(data.X, data.Y);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

Dataset load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  Dataset ds = decode_dataset(bytes);
  if (!ds.Y.allFinite() || !ds.X.allFinite()) {
    throw InvalidInput("'" + path + "' contains non-finite values");
  }
  return ds;
}

Dataset load_dataset(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::string_view(magic, 4) == kMagic) {
    Dataset ds = load_binary(path);
    if (options.output_divisor != 1.0) ds.Y /= options.output_divisor;
    return ds;
  }
  return load_csv(path, options);
}

Dataset take_rows(const Dataset& data, std::span<const Index> rows) {
  Dataset out;
  out.input_names = data.input_names;
  out.output_names = data.output_names;
  out.input_standardization = data.input_standardization;
  out.output_standardization = data.output_standardization;
  out.X.resize(static_cast<Index>(rows.size()), data.X.cols());
  out.Y.resize(static_cast<Index>(rows.size()), data.Y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    if (r < 0 || r >= data.size()) throw InvalidInput("row index out of range");
    if (data.X.cols() > 0) out.X.row(static_cast<Index>(i)) = data.X.row(r);
    out.Y.row(static_cast<Index>(i)) = data.Y.row(r);
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t n_test,
                                  std::uint64_t seed,
                                  const SplitOptions& options) {
  std::size_t n = static_cast<std::size_t>(data.size());
  if (options.strategy == SplitStrategy::kHead && options.head_rows > 0) {
    n = std::min(n, options.head_rows);
  }
  if (n_test >= n) {
    throw InvalidInput("test size " + std::to_string(n_test) +
                       " must be smaller than the " + std::to_string(n) +
                       " rows available");
  }
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with our own index draw: std::shuffle's use of the engine
  // is implementation-defined, and the split must not change across
  // standard libraries.
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(perm[i], perm[j]);
  }
  std::vector<Index> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<Index> train(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {take_rows(data, train), take_rows(data, test)};
}

namespace {

// Box-Muller on top of the raw engine output, for the same portability
// reason as the shuffle above.
class Normal {
 public:
  explicit Normal(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }
  // (0, 1]
  double uniform() {
    return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace

Dataset synth_latent_1d(std::size_t n, std::uint64_t seed, double noise_std) {
  if (n < 1) throw InvalidInput("synth_latent_1d needs n >= 1");
  Normal normal(seed);
  Dataset ds;
  const auto rows = static_cast<Index>(n);
  ds.X.resize(rows, 1);
  ds.Y.resize(rows, 3);
  for (Index i = 0; i < rows; ++i) ds.X(i, 0) = normal();
  for (Index i = 0; i < rows; ++i) {
    const double x = ds.X(i, 0);
    ds.Y(i, 0) = std::sin(2.0 * x);
    ds.Y(i, 1) = std::cos(3.0 * x);
    ds.Y(i, 2) = 0.5 * x * x;
  }
  if (noise_std > 0.0) {
    for (Index i = 0; i < ds.Y.size(); ++i) ds.Y.data()[i] += noise_std * normal();
  }
  ds.input_names = {"latent"};
  ds.output_names = {"y0", "y1", "y2"};
  return ds;
}

Dataset synth_regression(std::size_t n, std::uint64_t seed, double noise_std) {
  Normal normal(seed);
  Dataset ds;
  const auto rows = static_cast<Index>(n);
  ds.X.resize(rows, 1);
  ds.Y.resize(rows, 1);
  for (Index i = 0; i < rows; ++i) {
    const double x = -3.0 + 6.0 * normal.uniform();
    ds.X(i, 0) = x;
    ds.Y(i, 0) = std::sin(2.0 * x) + 0.5 * std::cos(5.0 * x) + noise_std * normal();
  }
  ds.input_names = {"x"};
  ds.output_names = {"y"};
  return ds;
}

std::vector<Dataset> synth_two_class(std::size_t n_per_class, Index dim,
                                     double separation, std::uint64_t seed) {
  if (dim < 2) throw InvalidInput("synth_two_class needs dim >= 2");
  Normal normal(seed);
  std::vector<Dataset> out(2);
  for (int c = 0; c < 2; ++c) {
    Dataset& ds = out[static_cast<std::size_t>(c)];
    ds.Y.resize(static_cast<Index>(n_per_class), dim);
    for (Index i = 0; i < ds.Y.rows(); ++i) {
      const double t = normal();
      for (Index r = 0; r < dim; ++r) {
        // class 1 traces a different curve, shifted along the first axis
        const double phase = c == 0 ? 0.7 * r : 1.9 * r + 0.4;
        ds.Y(i, r) = std::sin(t + phase) + 0.05 * normal();
      }
      if (c == 1) ds.Y(i, 0) += separation;
    }
    ds.X.resize(ds.Y.rows(), 0);
    for (Index r = 0; r < dim; ++r) ds.output_names.push_back(fmt::format("y{}", r));
  }
  return out;
}

Dataset standardize(const Dataset& data, bool inputs, bool outputs) {
  Dataset out = data;
  if (inputs && data.has_inputs()) {
    out.input_standardization = fit_standardization(data.X);
    out.X = out.input_standardization->apply(data.X);
  }
  if (outputs) {
    out.output_standardization = fit_standardization(data.Y);
    out.Y = out.output_standardization->apply(data.Y);
  }
  return out;
}

Dataset destandardize(const Dataset& data) {
  Dataset out = data;
  if (data.input_standardization) {
    out.X = data.input_standardization->invert(data.X);
    out.input_standardization.reset();
  }
  if (data.output_standardization) {
    out.Y = data.output_standardization->invert(data.Y);
    out.output_standardization.reset();
  }
  return out;
}

}  // namespace dgp
