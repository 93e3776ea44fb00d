#pragma once

#include <cstddef>
#include <string>

#include "prunekit/errors.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

struct SgdConfig {
  double lr = 0.1;
  double momentum = 0.0;
  double weight_decay = 0.0;

  void validate() const {
    if (!(lr >= 0.0)) throw ConfigError("sgd: lr must be >= 0, got " + std::to_string(lr));
    if (!(momentum >= 0.0) || momentum >= 1.0)
      throw ConfigError("sgd: momentum must be in [0,1), got " + std::to_string(momentum));
    if (!(weight_decay >= 0.0))
      throw ConfigError("sgd: weight_decay must be >= 0, got " + std::to_string(weight_decay));
  }
};

/// One SGD step with classical momentum and decoupled-from-nothing L2 decay:
///   v <- momentum*v + g + weight_decay*p
///   p <- p - lr*v
/// velocity must match the parameter shape; it is updated in place.
inline void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, const SgdConfig& cfg) {
  if (!same_shape(param, grad))
    throw DimensionError("sgd_step: grad " + grad.shape_str() + " does not match param " +
                         param.shape_str());
  if (!same_shape(param, velocity))
    throw DimensionError("sgd_step: velocity " + velocity.shape_str() + " does not match param " +
                         param.shape_str());
  const std::size_t count = param.data.size();
  for (std::size_t i = 0; i < count; ++i) {
    const double v = cfg.momentum * velocity.data[i] + grad.data[i] +
                     cfg.weight_decay * param.data[i];
    velocity.data[i] = v;
    param.data[i] -= cfg.lr * v;
  }
}

}  // namespace prunekit
