#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfsr/ndgrad/autograd.hpp"

namespace mfsr::ndgrad {

struct GradCheckOptions {
  double step = 1e-4;       ///< central-difference step h
  double tolerance = 1e-4;  ///< pass threshold on the relative error
  /// Entries sampled per input/parameter; 0 checks every entry.
  std::size_t max_entries = 0;
  std::uint64_t seed = 7;
  /// Parameter checks only: an entry that disagrees is re-probed with steps
  /// 10x, 100x, ... smaller, up to this many times, keeping the closest
  /// estimate. Lets a probe that straddles a ReLU kink be told apart from a
  /// wrong gradient, which disagrees at every step.
  std::size_t refinements = 0;
};

/// Relative error per checked array is max|analytic - numeric| divided by
/// max(max|analytic|, max|numeric|, 1e-8); the reported value is the worst
/// array.
struct GradCheckResult {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
  bool passed = false;
};

/// Checks d f / d inputs, where f receives the inputs as differentiable leaves.
GradCheckResult check_gradients(const std::string& name,
                                const std::function<Var(const std::vector<Var>&)>& f,
                                std::vector<Tensor> inputs, const GradCheckOptions& opts = {});

/// Checks gradients of `loss` with respect to parameters, perturbing their
/// values in place. `loss` must rebuild its graph from current values on
/// every call and be deterministic.
GradCheckResult check_parameter_gradients(const std::string& name, const std::function<Var()>& loss,
                                          const std::vector<Parameter*>& params,
                                          const GradCheckOptions& opts = {});

/// Finite-difference checks of every differentiable op in this library on
/// small random f64 inputs. Each op output is contracted with a fixed random
/// weight tensor to form the scalar loss.
std::vector<GradCheckResult> op_gradient_suite(std::uint64_t seed = 1, const GradCheckOptions& opts = {});

}  // namespace mfsr::ndgrad
