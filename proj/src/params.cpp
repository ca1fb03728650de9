#include "dgp/params.hpp"

#include <cmath>

namespace dgp {

Vector GlobalParams::flatten() const {
  const Index m = this->m();
  const Index q = this->q();
  if (kernel.dim() != q) throw DimensionError("kernel/inducing dimension mismatch");
  Vector out(flat_size(m, q));
  Index k = 0;
  for (Index j = 0; j < m; ++j) {
    for (Index r = 0; r < q; ++r) out[k++] = inducing.Z(j, r);
  }
  for (Index r = 0; r < q; ++r) out[k++] = std::log(kernel.ard_weights[r]);
  out[k++] = std::log(kernel.signal_variance);
  out[k++] = std::log(kernel.noise_precision);
  return out;
}

GlobalParams GlobalParams::unflatten(const Eigen::Ref<const Vector>& flat,
                                     Index m, Index q) {
  if (flat.size() != flat_size(m, q)) {
    throw DimensionError("flattened globals have length " +
                         std::to_string(flat.size()) + ", expected " +
                         std::to_string(flat_size(m, q)));
  }
  GlobalParams g;
  g.inducing.Z.resize(m, q);
  Index k = 0;
  for (Index j = 0; j < m; ++j) {
    for (Index r = 0; r < q; ++r) g.inducing.Z(j, r) = flat[k++];
  }
  g.kernel.ard_weights.resize(q);
  for (Index r = 0; r < q; ++r) g.kernel.ard_weights[r] = std::exp(flat[k++]);
  g.kernel.signal_variance = std::exp(flat[k++]);
  g.kernel.noise_precision = std::min(std::exp(flat[k++]), kMaxNoisePrecision);
  return g;
}

void GlobalParams::validate() const {
  inducing.validate();
  kernel.validate();
  if (kernel.dim() != q()) throw DimensionError("kernel/inducing dimension mismatch");
}

Vector flatten_gradient(const GlobalGradient& grad) {
  const KernelGradient& g = grad.kernel;
  const Index m = g.Z.rows();
  const Index q = g.Z.cols();
  Vector out(GlobalParams::flat_size(m, q));
  Index k = 0;
  for (Index j = 0; j < m; ++j) {
    for (Index r = 0; r < q; ++r) out[k++] = g.Z(j, r);
  }
  for (Index r = 0; r < q; ++r) out[k++] = g.log_ard_weights[r];
  out[k++] = g.log_signal_variance;
  out[k++] = grad.log_noise_precision;
  return out;
}

bool noise_capped(const Eigen::Ref<const Vector>& flat) {
  return flat.size() > 0 && flat[flat.size() - 1] > std::log(kMaxNoisePrecision);
}

}  // namespace dgp
