#pragma once

#include <functional>

#include "dgp/backend.hpp"

namespace dgp::detail {

std::unique_ptr<Backend> make_inprocess_backend(std::size_t k, bool threaded,
                                                std::optional<std::size_t> fail);
std::unique_ptr<Backend> make_process_backend(std::size_t k, const BackendOptions& options);

inline LatentPosterior stack_latents(
    const std::vector<Partition>& parts,
    const std::function<const LatentPosterior&(std::size_t)>& block) {
  Index n = 0;
  Index q = 0;
  for (const auto& p : parts) {
    n += p.count;
    q = block(p.index).dim();
  }
  LatentPosterior out;
  out.means.resize(n, q);
  out.variances.resize(n, q);
  out.frozen = true;
  for (const auto& p : parts) {
    const LatentPosterior& b = block(p.index);
    out.means.middleRows(p.begin, p.count) = b.means;
    out.variances.middleRows(p.begin, p.count) = b.variances;
    out.frozen = out.frozen && b.frozen;
  }
  return out;
}

}  // namespace dgp::detail
