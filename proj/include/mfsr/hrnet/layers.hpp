#pragma once

#include <random>
#include <string>

#include "mfsr/ndgrad/ops.hpp"

namespace mfsr::hrnet {

using ndgrad::Dtype;
using ndgrad::Parameter;
using ndgrad::ParameterStore;
using ndgrad::Var;

// Thin layer objects: each registers its parameters in a store under a name
// prefix and applies the corresponding ndgrad op. Weight tensors use
// Kaiming-uniform initialization with bound 1/sqrt(fan_in); biases use the
// same bound.

class Conv2d {
 public:
  Conv2d(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out, std::size_t k,
         std::size_t stride, std::size_t pad, Dtype dtype, std::mt19937_64& rng, bool bias = true);
  Var operator()(const Var& x) const;

  Parameter& weight() const { return *weight_; }
  Parameter* bias() const { return bias_; }

 private:
  Parameter* weight_;
  Parameter* bias_ = nullptr;
  std::size_t stride_, pad_;
};

class ConvTranspose2d {
 public:
  ConvTranspose2d(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                  std::size_t k, std::size_t stride, Dtype dtype, std::mt19937_64& rng);
  Var operator()(const Var& x) const;

 private:
  Parameter* weight_;
  Parameter* bias_;
  std::size_t stride_;
};

/// One shared slope, initialized to 0.25.
class PReLU {
 public:
  PReLU(ParameterStore& store, const std::string& prefix, Dtype dtype);
  Var operator()(const Var& x) const;

 private:
  Parameter* slope_;
};

/// x + PReLU(conv(PReLU(conv(x)))), both convs h -> h, k3 s1 p1.
class ResidualBlock {
 public:
  ResidualBlock(ParameterStore& store, const std::string& prefix, std::size_t channels, std::size_t k,
                Dtype dtype, std::mt19937_64& rng);
  Var operator()(const Var& x) const;
  /// The residual branch alone, without the skip connection.
  Var branch(const Var& x) const;

 private:
  Conv2d conv0_;
  PReLU act0_;
  Conv2d conv1_;
  PReLU act1_;
};

/// Affine batch normalization; running statistics are non-trainable buffers
/// stored alongside the affine parameters.
class BatchNorm2d {
 public:
  BatchNorm2d(ParameterStore& store, const std::string& prefix, std::size_t channels, Dtype dtype,
              double momentum = 0.1, double eps = 1e-5);
  Var operator()(const Var& x, ndgrad::Mode mode) const;

 private:
  Parameter* gamma_;
  Parameter* beta_;
  Parameter* running_mean_;
  Parameter* running_var_;
  double momentum_, eps_;
};

class Linear {
 public:
  Linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out, Dtype dtype,
         std::mt19937_64& rng, bool bias = true);
  Var operator()(const Var& x) const;

 private:
  Parameter* weight_;
  Parameter* bias_ = nullptr;
};

}  // namespace mfsr::hrnet
