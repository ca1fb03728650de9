#include "dgp/worker.hpp"

#include <cmath>
#include <exception>
#include <iostream>

#include "dgp/data.hpp"
#include "dgp/wire.hpp"

namespace dgp {

void Worker::set_data(Matrix X, Matrix Y) {
  if (X.rows() != Y.rows()) throw DimensionError("X and Y differ in row count");
  Y_ = std::move(Y);
  latents_ = LatentPosterior::observed(X);
  accum_.reset();
}

void Worker::set_locals(Matrix means, Matrix log_variances) {
  if (means.rows() != Y_.rows() || log_variances.rows() != Y_.rows()) {
    throw DimensionError("locals have " + std::to_string(means.rows()) +
                         " rows, block has " + std::to_string(Y_.rows()));
  }
  latents_ = LatentPosterior::latent(std::move(means), log_variances.array().exp().matrix());
  log_variances_ = std::move(log_variances);
}

void Worker::set_globals(const Vector& flat, Index m, Index q) {
  GlobalParams g = GlobalParams::unflatten(flat, m, q);
  g.validate();
  globals_ = std::move(g);
  accum_.reset();
}

void Worker::set_accumulators(Accumulators accum) { accum_ = std::move(accum); }

const GlobalParams& Worker::globals() const {
  if (!globals_) throw ProtocolError("globals have not been set");
  return *globals_;
}

const Accumulators& Worker::accum() const {
  if (!accum_) throw ProtocolError("accumulators have not been set");
  return *accum_;
}

PartialSums Worker::compute_terms() const {
  const GlobalParams& g = globals();
  return local_terms(Y_, latents_, g.inducing, g.kernel);
}

LocalGradient Worker::compute_gradients() const {
  const GlobalParams& g = globals();
  return local_gradients(Y_, latents_, g.inducing, g.kernel, accum());
}

void Worker::local_step(std::uint32_t steps, double step_size) {
  if (latents_.frozen) return;
  const GlobalParams& g = globals();
  for (std::uint32_t s = 0; s < steps; ++s) {
    const LocalGradient grad =
        local_gradients(Y_, latents_, g.inducing, g.kernel, accum());
    latents_.means += step_size * grad.d_means;
    log_variances_ += step_size * grad.d_log_variances;
    latents_.variances = log_variances_.array().exp().matrix();
  }
}

int serve(int in_fd, int out_fd, std::uint32_t partition, bool fail_on_compute) {
  using wire::Tag;
  Worker w;
  Index m = 0;
  auto reply_error = [&](const std::string& what) {
    const std::span<const std::uint8_t> bytes(
        reinterpret_cast<const std::uint8_t*>(what.data()), what.size());
    wire::write_message(out_fd, Tag::kError, bytes);
  };

  try {
    wire::write_message(out_fd, Tag::kHello, wire::encode_hello(partition));
    while (true) {
      const auto msg = wire::read_message(in_fd);
      if (!msg) return 0;
      try {
        switch (msg->tag) {
          case Tag::kSetData: {
            Dataset ds = decode_dataset(msg->payload);
            w.set_data(std::move(ds.X), std::move(ds.Y));
            break;
          }
          case Tag::kSetGlobals: {
            const Vector flat = wire::decode_vector(msg->payload);
            const Index q = w.latents().dim();
            if (q < 1 || (flat.size() - q - 2) % q != 0 || flat.size() < 2 * q + 2) {
              throw ProtocolError("globals of length " + std::to_string(flat.size()) +
                                  " do not fit q = " + std::to_string(q));
            }
            m = (flat.size() - q - 2) / q;
            w.set_globals(flat, m, q);
            break;
          }
          case Tag::kSetLocals: {
            auto [means, log_vars] =
                wire::decode_locals(msg->payload, w.Y().rows(), w.latents().dim());
            w.set_locals(means, log_vars);
            break;
          }
          case Tag::kComputeTerms:
            if (fail_on_compute) return 3;
            wire::write_message(out_fd, Tag::kTermsResult,
                                wire::encode_terms(w.compute_terms()));
            break;
          case Tag::kSetAccum:
            w.set_accumulators(wire::decode_accum(msg->payload, m, w.Y().cols()));
            break;
          case Tag::kComputeGrads:
            wire::write_message(out_fd, Tag::kGradResult,
                                wire::encode_gradient(w.compute_gradients()));
            break;
          case Tag::kLocalStep: {
            const auto [steps, step_size] = wire::decode_local_step(msg->payload);
            w.local_step(steps, step_size);
            wire::write_message(out_fd, Tag::kLocalResult,
                                wire::encode_locals(w.latents().means, w.log_variances()));
            break;
          }
          case Tag::kShutdown:
            return 0;
          default:
            throw ProtocolError("unexpected message tag " +
                                std::to_string(static_cast<int>(msg->tag)));
        }
      } catch (const ProtocolError&) {
        throw;
      } catch (const std::exception& e) {
        reply_error(e.what());
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "dgp-worker " << partition << ": " << e.what() << '\n';
    return 2;
  }
}

}  // namespace dgp
