#pragma once

// Framing and payload codecs for the coordinator <-> worker byte stream.
//
// Every message is [u32 payload length][u8 tag][payload], little-endian.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dgp/bound.hpp"
#include "dgp/params.hpp"

namespace dgp::wire {

inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxPayload = 1u << 30;

enum class Tag : std::uint8_t {
  kHello = 0x01,         // u16 version, u32 partition
  kSetData = 0x02,       // DGPD dataset bytes
  kSetGlobals = 0x03,    // flattened G
  kComputeTerms = 0x04,  // empty
  kTermsResult = 0x05,   // A, B, KL, u64 count, C, D
  kSetAccum = 0x06,      // P_inv, P_inv_C, Kmm_inv
  kLocalStep = 0x07,     // u32 steps, f64 step size
  kLocalResult = 0x08,   // means, log variances
  kSetLocals = 0x09,     // means, log variances
  kComputeGrads = 0x0A,  // empty
  kGradResult = 0x0B,    // flattened global share, d_means, d_log_variances
  kError = 0x7E,         // UTF-8 message
  kShutdown = 0x7F,      // empty
};

bool known_tag(std::uint8_t tag);

struct Message {
  Tag tag;
  std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> frame(Tag tag, std::span<const std::uint8_t> payload);

// Blocking I/O on a file descriptor.  write_message throws ProtocolError on
// any failure, including a closed peer.  read_message returns nullopt on a
// clean end of stream at a message boundary and throws on a truncated one
// or an unknown tag.
void write_message(int fd, Tag tag, std::span<const std::uint8_t> payload);
std::optional<Message> read_message(int fd);

// Incremental parser for non-blocking readers.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Message> next();
  bool empty() const { return buf_.size() == pos_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> encode_hello(std::uint32_t partition);
std::uint32_t decode_hello(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_vector(const Vector& v);
Vector decode_vector(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_terms(const PartialSums& s);
PartialSums decode_terms(std::span<const std::uint8_t> payload, Index m, Index d);

std::vector<std::uint8_t> encode_accum(const Accumulators& a);
Accumulators decode_accum(std::span<const std::uint8_t> payload, Index m, Index d);

// Means then log variances, each n x q row-major.
std::vector<std::uint8_t> encode_locals(const Matrix& means,
                                        const Matrix& log_variances);
std::pair<Matrix, Matrix> decode_locals(std::span<const std::uint8_t> payload,
                                        Index n, Index q);

std::vector<std::uint8_t> encode_gradient(const LocalGradient& g);
// `latent` says whether the d_means/d_log_variances blocks are present.
LocalGradient decode_gradient(std::span<const std::uint8_t> payload, Index m,
                              Index q, Index n, bool latent);

std::vector<std::uint8_t> encode_local_step(std::uint32_t steps,
                                            double step_size);
std::pair<std::uint32_t, double> decode_local_step(
    std::span<const std::uint8_t> payload);

}  // namespace dgp::wire
