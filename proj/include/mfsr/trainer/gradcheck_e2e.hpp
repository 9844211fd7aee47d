#pragma once

#include "mfsr/ndgrad/gradcheck.hpp"

namespace mfsr::trainer {

/// Finite-difference check of the whole training graph at a tiny f64
/// configuration: HighRes-net (hidden 8, three real views padded to four,
/// 16x16 inputs, zoom 3), ShiftNet and the registered loss with a
/// differentiable kernel, ShiftNet in training mode. Gradients are checked for
/// both networks' parameters except those the loss is invariant to.
/// Probes that straddle ReLU, PReLU or max-pool kinks are refined with smaller
/// steps.
ndgrad::GradCheckResult end_to_end_gradient_check(std::uint64_t seed = 3,
                                                  const ndgrad::GradCheckOptions& opts = {1e-6, 1e-4, 6, 7, 2});

}  // namespace mfsr::trainer
