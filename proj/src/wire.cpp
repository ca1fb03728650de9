#include "dgp/wire.hpp"

#include <cerrno>
#include <cstring>
#include <string>

#include <sys/socket.h>
#include <unistd.h>

#include "dgp/bytes.hpp"

namespace dgp::wire {

namespace {

void write_all(int fd, const std::uint8_t* p, std::size_t n) {
  while (n > 0) {
    ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0 && errno == ENOTSOCK) w = ::write(fd, p, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("write failed: ") + std::strerror(errno));
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

// Returns the number of bytes read, short only at end of stream.
std::size_t read_all(int fd, std::uint8_t* p, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, p + got, n - got);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("read failed: ") + std::strerror(errno));
    }
    if (r == 0) break;
    got += static_cast<std::size_t>(r);
  }
  return got;
}

void check_header(std::uint32_t length, std::uint8_t tag) {
  if (length > kMaxPayload) {
    throw ProtocolError("payload of " + std::to_string(length) + " bytes exceeds limit");
  }
  if (!known_tag(tag)) throw ProtocolError("unknown message tag " + std::to_string(tag));
}

}  // namespace

bool known_tag(std::uint8_t tag) {
  return (tag >= 0x01 && tag <= 0x0B) || tag == 0x7E || tag == 0x7F;
}

std::vector<std::uint8_t> frame(Tag tag, std::span<const std::uint8_t> payload) {
  if (payload.size() > kMaxPayload) throw ProtocolError("payload too large");
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.u8(static_cast<std::uint8_t>(tag));
  auto out = w.take();
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

void write_message(int fd, Tag tag, std::span<const std::uint8_t> payload) {
  const auto bytes = frame(tag, payload);
  write_all(fd, bytes.data(), bytes.size());
}

std::optional<Message> read_message(int fd) {
  std::uint8_t header[5];
  const std::size_t got = read_all(fd, header, sizeof header);
  if (got == 0) return std::nullopt;
  if (got < sizeof header) throw ProtocolError("stream ended inside a header");
  std::uint32_t length;
  std::memcpy(&length, header, 4);
  check_header(length, header[4]);
  Message msg{static_cast<Tag>(header[4]), std::vector<std::uint8_t>(length)};
  if (read_all(fd, msg.payload.data(), length) < length) {
    throw ProtocolError("stream ended inside a payload");
  }
  return msg;
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
  if (pos_ > 0 && pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> FrameReader::next() {
  if (buf_.size() - pos_ < 5) return std::nullopt;
  std::uint32_t length;
  std::memcpy(&length, buf_.data() + pos_, 4);
  const std::uint8_t tag = buf_[pos_ + 4];
  check_header(length, tag);
  if (buf_.size() - pos_ - 5 < length) return std::nullopt;
  const auto* start = buf_.data() + pos_ + 5;
  Message msg{static_cast<Tag>(tag), std::vector<std::uint8_t>(start, start + length)};
  pos_ += 5 + length;
  return msg;
}

std::vector<std::uint8_t> encode_hello(std::uint32_t partition) {
  ByteWriter w;
  w.u16(kProtocolVersion);
  w.u32(partition);
  return w.take();
}

std::uint32_t decode_hello(std::span<const std::uint8_t> payload) {
  ByteReader r(payload);
  const auto version = r.u16();
  if (version != kProtocolVersion) {
    throw ProtocolError("worker speaks protocol version " + std::to_string(version));
  }
  const auto partition = r.u32();
  r.expect_end();
  return partition;
}

std::vector<std::uint8_t> encode_vector(const Vector& v) {
  ByteWriter w;
  w.vector(v);
  return w.take();
}

Vector decode_vector(std::span<const std::uint8_t> payload) {
  if (payload.size() % 8 != 0) throw ProtocolError("payload is not a whole number of doubles");
  ByteReader r(payload);
  return r.vector(static_cast<Index>(payload.size() / 8));
}

std::vector<std::uint8_t> encode_terms(const PartialSums& s) {
  ByteWriter w;
  w.f64(s.A);
  w.f64(s.B);
  w.f64(s.KL);
  w.u64(s.count);
  w.matrix(s.C);
  w.matrix(s.D);
  return w.take();
}

PartialSums decode_terms(std::span<const std::uint8_t> payload, Index m, Index d) {
  ByteReader r(payload);
  PartialSums s;
  s.A = r.f64();
  s.B = r.f64();
  s.KL = r.f64();
  s.count = r.u64();
  s.C = r.matrix(m, d);
  s.D = r.matrix(m, m);
  r.expect_end();
  return s;
}

std::vector<std::uint8_t> encode_accum(const Accumulators& a) {
  ByteWriter w;
  w.matrix(a.P_inv);
  w.matrix(a.P_inv_C);
  w.matrix(a.Kmm_inv);
  return w.take();
}

Accumulators decode_accum(std::span<const std::uint8_t> payload, Index m, Index d) {
  ByteReader r(payload);
  Accumulators a;
  a.P_inv = r.matrix(m, m);
  a.P_inv_C = r.matrix(m, d);
  a.Kmm_inv = r.matrix(m, m);
  r.expect_end();
  return a;
}

std::vector<std::uint8_t> encode_locals(const Matrix& means,
                                        const Matrix& log_variances) {
  if (means.rows() != log_variances.rows() || means.cols() != log_variances.cols()) {
    throw DimensionError("means and log variances differ in shape");
  }
  ByteWriter w;
  w.matrix(means);
  w.matrix(log_variances);
  return w.take();
}

std::pair<Matrix, Matrix> decode_locals(std::span<const std::uint8_t> payload,
                                        Index n, Index q) {
  ByteReader r(payload);
  Matrix means = r.matrix(n, q);
  Matrix log_vars = r.matrix(n, q);
  r.expect_end();
  return {std::move(means), std::move(log_vars)};
}

std::vector<std::uint8_t> encode_gradient(const LocalGradient& g) {
  ByteWriter w;
  w.vector(flatten_gradient(g.global));
  w.matrix(g.d_means);
  w.matrix(g.d_log_variances);
  return w.take();
}

LocalGradient decode_gradient(std::span<const std::uint8_t> payload, Index m,
                              Index q, Index n, bool latent) {
  ByteReader r(payload);
  const Vector flat = r.vector(GlobalParams::flat_size(m, q));
  LocalGradient g;
  g.global = GlobalGradient::zeros(m, q);
  Index k = 0;
  for (Index j = 0; j < m; ++j) {
    for (Index c = 0; c < q; ++c) g.global.kernel.Z(j, c) = flat[k++];
  }
  for (Index c = 0; c < q; ++c) g.global.kernel.log_ard_weights[c] = flat[k++];
  g.global.kernel.log_signal_variance = flat[k++];
  g.global.log_noise_precision = flat[k++];
  if (latent) {
    g.d_means = r.matrix(n, q);
    g.d_log_variances = r.matrix(n, q);
  }
  r.expect_end();
  return g;
}

std::vector<std::uint8_t> encode_local_step(std::uint32_t steps,
                                            double step_size) {
  ByteWriter w;
  w.u32(steps);
  w.f64(step_size);
  return w.take();
}

std::pair<std::uint32_t, double> decode_local_step(
    std::span<const std::uint8_t> payload) {
  ByteReader r(payload);
  const auto steps = r.u32();
  const double step = r.f64();
  r.expect_end();
  return {steps, step};
}

}  // namespace dgp::wire
