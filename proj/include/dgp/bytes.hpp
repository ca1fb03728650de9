#pragma once

// Little-endian byte buffers shared by the dataset, checkpoint and wire
// formats.  Matrices are always serialized row-major.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dgp/error.hpp"
#include "dgp/kernel.hpp"

namespace dgp {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class ByteWriter {
 public:
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u16(std::uint16_t v) { raw(&v, sizeof v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void bytes(std::string_view s) { raw(s.data(), s.size()); }

  void matrix(const Matrix& M) {
    const Matrix::Index rows = M.rows();
    for (Matrix::Index i = 0; i < rows; ++i) {
      for (Matrix::Index j = 0; j < M.cols(); ++j) f64(M(i, j));
    }
  }
  void vector(const Vector& v) {
    for (Index i = 0; i < v.size(); ++i) f64(v[i]);
  }

  const std::vector<std::uint8_t>& buffer() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }

  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return get<std::uint8_t>(); }
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return get<double>(); }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  Matrix matrix(Index rows, Index cols) {
    if (rows < 0 || cols < 0) throw ProtocolError("negative matrix shape");
    need(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 8);
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) M(i, j) = f64();
    }
    return M;
  }
  Vector vector(Index n) {
    need(static_cast<std::size_t>(n) * 8);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = f64();
    return v;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0) {
      throw ProtocolError(std::to_string(remaining()) + " trailing bytes");
    }
  }

 private:
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw ProtocolError("truncated input: need " + std::to_string(n) +
                          " bytes, have " + std::to_string(remaining()));
    }
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace dgp
