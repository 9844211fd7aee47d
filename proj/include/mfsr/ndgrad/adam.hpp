#pragma once

#include <cstdint>
#include <unordered_map>

#include "mfsr/ndgrad/autograd.hpp"

namespace mfsr::ndgrad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for every parameter the optimizer has touched.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::unordered_map<const Parameter*, Tensor> first_moment;
  std::unordered_map<const Parameter*, Tensor> second_moment;
};

/// One bias-corrected Adam update over `params`, using whatever gradients are
/// present in `grads`. A trainable parameter absent from `grads` is treated as
/// having zero gradient (its moments still decay).
void adam_step(std::span<Parameter* const> params, const Gradients& grads, AdamState& state);

/// Convenience overload over every trainable parameter of a store.
void adam_step(ParameterStore& store, const Gradients& grads, AdamState& state);

}  // namespace mfsr::ndgrad
