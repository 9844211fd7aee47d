#include "mfsr/hrnet/layers.hpp"

#include <cmath>

namespace mfsr::hrnet {

using ndgrad::Tensor;

namespace {

Tensor uniform_init(ndgrad::Shape shape, std::size_t fan_in, Dtype dtype, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> unif(-bound, bound);
  Tensor t(std::move(shape), dtype);
  for (double& v : t.values()) v = unif(rng);
  t.round_to_dtype();
  return t;
}

}  // namespace

Conv2d::Conv2d(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out, std::size_t k,
               std::size_t stride, std::size_t pad, Dtype dtype, std::mt19937_64& rng, bool bias)
    : weight_(&store.add(prefix + ".weight", uniform_init({out, in, k, k}, in * k * k, dtype, rng))),
      stride_(stride),
      pad_(pad) {
  if (bias) bias_ = &store.add(prefix + ".bias", uniform_init({out}, in * k * k, dtype, rng));
}

Var Conv2d::operator()(const Var& x) const {
  return ndgrad::conv2d(x, ndgrad::leaf(*weight_), bias_ ? ndgrad::leaf(*bias_) : Var{}, stride_, pad_);
}

ConvTranspose2d::ConvTranspose2d(ParameterStore& store, const std::string& prefix, std::size_t in,
                                 std::size_t out, std::size_t k, std::size_t stride, Dtype dtype,
                                 std::mt19937_64& rng)
    : weight_(&store.add(prefix + ".weight", uniform_init({in, out, k, k}, out * k * k, dtype, rng))),
      bias_(&store.add(prefix + ".bias", uniform_init({out}, out * k * k, dtype, rng))),
      stride_(stride) {}

Var ConvTranspose2d::operator()(const Var& x) const {
  return ndgrad::conv_transpose2d(x, ndgrad::leaf(*weight_), ndgrad::leaf(*bias_), stride_);
}

PReLU::PReLU(ParameterStore& store, const std::string& prefix, Dtype dtype)
    : slope_(&store.add(prefix + ".slope", Tensor({1}, {0.25}, dtype))) {}

Var PReLU::operator()(const Var& x) const { return ndgrad::prelu(x, ndgrad::leaf(*slope_)); }

ResidualBlock::ResidualBlock(ParameterStore& store, const std::string& prefix, std::size_t channels,
                             std::size_t k, Dtype dtype, std::mt19937_64& rng)
    : conv0_(store, prefix + ".conv0", channels, channels, k, 1, k / 2, dtype, rng),
      act0_(store, prefix + ".act0", dtype),
      conv1_(store, prefix + ".conv1", channels, channels, k, 1, k / 2, dtype, rng),
      act1_(store, prefix + ".act1", dtype) {}

Var ResidualBlock::branch(const Var& x) const { return act1_(conv1_(act0_(conv0_(x)))); }

Var ResidualBlock::operator()(const Var& x) const { return ndgrad::add(x, branch(x)); }

BatchNorm2d::BatchNorm2d(ParameterStore& store, const std::string& prefix, std::size_t channels, Dtype dtype,
                         double momentum, double eps)
    : gamma_(&store.add(prefix + ".gamma", Tensor::full({channels}, 1.0, dtype))),
      beta_(&store.add(prefix + ".beta", Tensor({channels}, dtype))),
      running_mean_(&store.add(prefix + ".running_mean", Tensor({channels}, dtype), false)),
      running_var_(&store.add(prefix + ".running_var", Tensor::full({channels}, 1.0, dtype), false)),
      momentum_(momentum),
      eps_(eps) {}

Var BatchNorm2d::operator()(const Var& x, ndgrad::Mode mode) const {
  ndgrad::BatchNormState state{running_mean_->value, running_var_->value, momentum_, eps_};
  Var out = ndgrad::batchnorm2d(x, ndgrad::leaf(*gamma_), ndgrad::leaf(*beta_), state, mode);
  if (mode == ndgrad::Mode::train) {
    running_mean_->value = std::move(state.running_mean);
    running_var_->value = std::move(state.running_var);
  }
  return out;
}

Linear::Linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out, Dtype dtype,
               std::mt19937_64& rng, bool bias)
    : weight_(&store.add(prefix + ".weight", uniform_init({out, in}, in, dtype, rng))) {
  if (bias) bias_ = &store.add(prefix + ".bias", uniform_init({out}, in, dtype, rng));
}

Var Linear::operator()(const Var& x) const {
  return ndgrad::linear(x, ndgrad::leaf(*weight_), bias_ ? ndgrad::leaf(*bias_) : Var{});
}

}  // namespace mfsr::hrnet
