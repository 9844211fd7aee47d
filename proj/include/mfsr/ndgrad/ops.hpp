#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mfsr/ndgrad/autograd.hpp"

namespace mfsr::ndgrad {

enum class Mode { train, eval };

// ---- elementwise and reductions -------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double offset);
Var square(const Var& x);
/// Clamp to [lo, hi]; gradient is zero where the clamp is active.
Var clamp(const Var& x, double lo, double hi);
Var sum(const Var& x);
Var mean(const Var& x);
Var reshape(const Var& x, Shape shape);

/// Euclidean norm of each row of an [N, D] array, giving [N]. The gradient
/// at a zero row is taken to be zero.
Var row_norms(const Var& x);

// ---- structural -------------------------------------------------------------

/// Concatenation along `axis`; all other extents must agree.
Var concat(std::span<const Var> parts, std::size_t axis);
/// Gathers slices of axis 0 (repeats allowed).
Var take_rows(const Var& x, std::span<const std::size_t> rows);
/// out[n] = use_update[n] ? base[n] + update[n] : base[n], per axis-0 slice.
/// Gated slices copy `base` exactly and send no gradient to `update`.
Var gated_add(const Var& base, const Var& update, std::span<const std::uint8_t> use_update);
/// Spatial window [top, top+h) x [left, left+w) of an [N, C, H, W] array.
Var crop2d(const Var& x, std::size_t top, std::size_t left, std::size_t h, std::size_t w);
/// Subtracts the spatial mean of every [H, W] map.
Var center_spatial(const Var& x);

// ---- layers -----------------------------------------------------------------

/// Cross-correlation with zero padding. x [N,Cin,H,W], w [Cout,Cin,k,k],
/// optional bias [Cout]; output extent (H + 2 pad - k) / stride + 1.
Var conv2d(const Var& x, const Var& w, const Var& b, std::size_t stride, std::size_t pad);
/// Adjoint of conv2d with respect to its input. x [N,Cin,H,W],
/// w [Cin,Cout,k,k]; output extent (H - 1) stride + k.
Var conv_transpose2d(const Var& x, const Var& w, const Var& b, std::size_t stride);
/// max(x, 0) + slope * min(x, 0) with one shared slope.
Var prelu(const Var& x, const Var& slope);
Var relu(const Var& x);
/// Window maxima; trailing rows/cols that do not fill a window are dropped.
/// Ties resolve to the first element in scan order.
Var maxpool2d(const Var& x, std::size_t k, std::size_t stride);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Per-channel normalization. Train mode uses biased batch statistics and
/// updates the running estimates (unbiased variance); eval mode uses them.
Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, Mode mode);
/// x [N,Din] times w[Dout,Din] transposed, plus optional bias [Dout].
Var linear(const Var& x, const Var& w, const Var& b);
/// Inverted dropout; identity in eval mode or when p == 0.
Var dropout(const Var& x, double p, Mode mode, std::uint64_t seed);

// ---- resampling -------------------------------------------------------------

/// Separable linear resampling of every [H, W] map: out = R_rows X R_cols^T.
/// rows is [H', H], cols is [W', W].
Var resample_separable(const Var& x, const Tensor& rows, const Tensor& cols);
/// Bicubic interpolation weights (a = -0.75, half-pixel centers, clamped
/// borders), one row per output sample.
Tensor bicubic_matrix(std::size_t in_size, std::size_t out_size, double scale);
/// Box-filter weights for downscaling by a possibly fractional ratio.
Tensor area_matrix(std::size_t in_size, std::size_t out_size);
/// Output extents round(H * scale), round(W * scale).
Var upsample_bicubic(const Var& x, double scale);
Var resize_area(const Var& x, std::size_t out_h, std::size_t out_w);

}  // namespace mfsr::ndgrad
