#pragma once

#include <functional>
#include <vector>

#include "mfsr/ndgrad/ops.hpp"

namespace mfsr::shiftlanczos {

using ndgrad::Tensor;
using ndgrad::Var;

/// Sub-pixel translation in pixels. Positive dx moves content right (towards
/// larger column index), positive dy moves it down.
struct Shift {
  double dx = 0.0;
  double dy = 0.0;
};

/// 1-D resampling filter: out[x] = sum_i taps[i] * in[x - (anchor + i)].
struct LanczosKernel {
  std::vector<double> taps;  ///< 2a+1 weights summing to one
  int anchor = 0;
  int a = 3;
};

/// Windowed sinc L(x) = sinc(x) sinc(x/a) on |x| < a, zero elsewhere. Exact
/// 1 at x = 0 and exact 0 at the other integers.
double lanczos_window(double x, int a);
double lanczos_window_derivative(double x, int a);

/// delta = m + f with m = floor(delta + 0.5), f in [-0.5, 0.5). The integer
/// part goes into the anchor; taps are L(j - f), j = -a..a, normalized.
LanczosKernel lanczos_kernel(double delta, int a = 3);
/// d taps / d delta for the kernel above (the anchor is locally constant).
std::vector<double> lanczos_kernel_derivative(double delta, int a = 3);

struct ShiftOptions {
  int a = 3;
  double max_shift = 10.0;
};

/// Separable Lanczos translation (horizontal pass, then vertical) of every
/// [H, W] plane of `img`, with reflect-101 borders. Throws if either
/// component exceeds max_shift in magnitude.
Tensor shift_image(const Tensor& img, Shift s, const ShiftOptions& opts = {});

/// Batched, differentiable variant. img is [N, C, H, W], shifts is [N, 2]
/// holding (dx, dy) per sample. Gradients always reach img; they reach the
/// shifts through the kernel weights only when differentiable_kernel is set.
Var shift_images(const Var& img, const Var& shifts, int a = 3, bool differentiable_kernel = true);

// ---- registered loss ----------------------------------------------------------

enum class LossKind { clear_bias_mse, mse };

struct RegisteredLossOptions {
  double lambda = 1e-6;
  LossKind kind = LossKind::clear_bias_mse;
  int a = 3;
  /// Predicted shifts are clamped to this range before resampling.
  double max_shift = 10.0;
  bool differentiable_kernel = true;
  /// High-res pixels dropped on each side before the comparison, so that
  /// resampled border values do not enter the loss.
  std::size_t border = 3;
};

/// Maps (sr [N,C,H,W], hr [N,C,H,W]) to shifts [N, 2] in high-res pixels.
using ShiftPredictor = std::function<Var(const Var& sr, const Tensor& hr)>;

struct RegisteredLoss {
  Var total;   ///< base + lambda * mean ||shift||_2
  Var base;    ///< comparison term only
  Var shifts;  ///< raw predicted shifts [N, 2]
};

/// Loss of sr against hr (both border-cropped), without registration.
Var unregistered_loss(const Var& sr, const Tensor& hr, const Tensor& mask, const RegisteredLossOptions& opts = {});

/// shift = predictor(sr, hr); loss(shift_images(sr, clamp(shift)), hr, mask)
/// + lambda * mean_n ||shift_n||_2.
RegisteredLoss registered_loss(const Var& sr, const Tensor& hr, const Tensor& mask, const ShiftPredictor& predictor,
                               const RegisteredLossOptions& opts = {});

}  // namespace mfsr::shiftlanczos
