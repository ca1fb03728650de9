#include <cstdio>
#include <fstream>
#include <iterator>

#include <unistd.h>

#include "dgp/bytes.hpp"
#include "dgp/model.hpp"

namespace dgp {

namespace {

constexpr std::string_view kMagic = "DGPM";

void write_standardization(ByteWriter& w, const std::optional<Standardization>& s) {
  w.u8(s ? 1 : 0);
  if (!s) return;
  w.vector(s->mean.transpose());
  w.vector(s->scale.transpose());
  for (bool c : s->constant) w.u8(c ? 1 : 0);
}

std::optional<Standardization> read_standardization(ByteReader& r, Index cols) {
  const auto present = r.u8();
  if (present > 1) throw ProtocolError("bad standardization flag");
  if (!present) return std::nullopt;
  Standardization s;
  s.mean = r.vector(cols).transpose();
  s.scale = r.vector(cols).transpose();
  for (Index c = 0; c < cols; ++c) s.constant.push_back(r.u8() != 0);
  return s;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelState& state) {
  state.validate();
  ByteWriter w;
  w.bytes(kMagic);
  w.u16(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(state.mode));
  w.u64(static_cast<std::uint64_t>(state.n()));
  w.u64(static_cast<std::uint64_t>(state.d()));
  w.u64(static_cast<std::uint64_t>(state.m()));
  w.u64(static_cast<std::uint64_t>(state.q()));
  w.matrix(state.Y);
  w.matrix(state.latents.means);
  w.matrix(state.latents.variances);
  w.matrix(state.globals.inducing.Z);
  w.vector(state.globals.kernel.ard_weights);
  w.f64(state.globals.kernel.signal_variance);
  w.f64(state.globals.kernel.noise_precision);
  write_standardization(w, state.input_standardization);
  write_standardization(w, state.output_standardization);
  w.u8(state.pca ? 1 : 0);
  if (state.pca) {
    w.vector(state.pca->mean.transpose());
    w.matrix(state.pca->components);
    w.vector(state.pca->scale.transpose());
  }
  return w.take();
}

ModelState decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != kMagic) throw ProtocolError("not a model checkpoint");
  const auto version = r.u16();
  if (version != kCheckpointVersion) {
    throw ProtocolError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto mode = r.u8();
  if (mode > 1) throw ProtocolError("bad model mode " + std::to_string(mode));
  const auto n = static_cast<Index>(r.u64());
  const auto d = static_cast<Index>(r.u64());
  const auto m = static_cast<Index>(r.u64());
  const auto q = static_cast<Index>(r.u64());
  if (n < 0 || d < 0 || m < 0 || q < 0) throw ProtocolError("bad checkpoint dimensions");

  ModelState s;
  s.mode = static_cast<ModelMode>(mode);
  s.Y = r.matrix(n, d);
  s.latents.means = r.matrix(n, q);
  s.latents.variances = r.matrix(n, q);
  s.latents.frozen = s.mode == ModelMode::kRegression;
  s.globals.inducing.Z = r.matrix(m, q);
  s.globals.kernel.ard_weights = r.vector(q);
  s.globals.kernel.signal_variance = r.f64();
  s.globals.kernel.noise_precision = r.f64();
  s.input_standardization = read_standardization(r, q);
  s.output_standardization = read_standardization(r, d);
  const auto has_pca = r.u8();
  if (has_pca > 1) throw ProtocolError("bad PCA flag");
  if (has_pca) {
    PcaProjection p;
    p.mean = r.vector(d).transpose();
    p.components = r.matrix(d, q);
    p.scale = r.vector(q).transpose();
    s.pca = std::move(p);
  }
  r.expect_end();
  s.validate();
  return s;
}

void save_checkpoint(const std::string& path, const ModelState& state) {
  const auto bytes = encode_checkpoint(state);
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + tmp + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw std::runtime_error("write to '" + tmp + "' failed");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot move checkpoint into place at '" + path + "'");
  }
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open checkpoint '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace dgp
