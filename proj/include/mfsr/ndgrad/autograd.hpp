#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mfsr/ndgrad/tensor.hpp"

namespace mfsr::ndgrad {

/// A named learnable (or buffer) array owned by a ParameterStore.
struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
};

/// Owns parameters with stable addresses, in registration order.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& add(std::string name, Tensor init, bool trainable = true);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }

  /// Number of trainable scalars, optionally restricted to names with `prefix`.
  std::size_t count(std::string_view prefix = {}) const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

namespace detail {
struct Node;
}

/// Handle to a value in the recorded computation graph.
///
/// Ops are free functions taking and returning Vars. Each result keeps its
/// inputs and a backward closure alive while gradient recording is enabled;
/// under NoGradGuard results are plain values and intermediates are freed as
/// soon as they go out of scope.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  explicit operator bool() const noexcept { return static_cast<bool>(node_); }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Dtype dtype() const { return value().dtype(); }
  bool requires_grad() const;
  /// Accumulated gradient after backward(); empty if none reached this node.
  const Tensor& grad() const;

  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// A value that never receives gradient.
Var constant(Tensor value);
/// A free leaf that receives gradient (gradient checks, inputs of interest).
Var variable(Tensor value);
/// A leaf bound to a parameter; gradients are reported per parameter.
Var leaf(Parameter& param);

using Gradients = std::unordered_map<const Parameter*, Tensor>;

/// Reverse-mode sweep from a one-element loss. Each graph may be swept once.
Gradients backward(const Var& loss);

bool grad_enabled();

/// Disables graph recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Gives a backward closure lazily zero-initialized gradient buffers for the
/// op's inputs. Inputs that do not require grad report wants(i) == false.
class GradSink {
 public:
  explicit GradSink(std::span<const Var> inputs) : inputs_(inputs) {}
  bool wants(std::size_t i) const;
  Tensor& at(std::size_t i);

 private:
  std::span<const Var> inputs_;
};

using BackwardFn = std::function<void(const Tensor& grad_out, GradSink& sink)>;

/// Wraps an op result into the graph. Rounds to dtype and enforces the
/// finite-value policy. The closure is kept only when some input requires
/// grad and recording is enabled.
Var record(Tensor value, std::vector<Var> inputs, const char* op, BackwardFn backward_fn);

}  // namespace mfsr::ndgrad
