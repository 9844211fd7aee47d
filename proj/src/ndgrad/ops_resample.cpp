#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "mfsr/ndgrad/ops.hpp"

namespace mfsr::ndgrad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Keys cubic convolution kernel with a = -0.75.
constexpr double kCubicA = -0.75;

double cubic_near(double t) { return ((kCubicA + 2.0) * t - (kCubicA + 3.0)) * t * t + 1.0; }
double cubic_far(double t) { return ((kCubicA * t - 5.0 * kCubicA) * t + 8.0 * kCubicA) * t - 4.0 * kCubicA; }

std::size_t scaled_extent(std::size_t n, double scale) {
  const auto out = static_cast<std::size_t>(std::lround(static_cast<double>(n) * scale));
  return std::max<std::size_t>(out, 1);
}

}  // namespace

Tensor bicubic_matrix(std::size_t in_size, std::size_t out_size, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("bicubic scale must be positive");
  Tensor m({out_size, in_size});
  const auto last = static_cast<std::ptrdiff_t>(in_size) - 1;
  for (std::size_t o = 0; o < out_size; ++o) {
    const double src = (static_cast<double>(o) + 0.5) / scale - 0.5;
    const double base = std::floor(src);
    const double t = src - base;
    const double w[4] = {cubic_far(t + 1.0), cubic_near(t), cubic_near(1.0 - t), cubic_far(2.0 - t)};
    for (int k = 0; k < 4; ++k) {
      const auto idx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(base) - 1 + k, 0, last);
      m[o * in_size + static_cast<std::size_t>(idx)] += w[k];
    }
  }
  return m;
}

Tensor area_matrix(std::size_t in_size, std::size_t out_size) {
  if (out_size == 0 || in_size == 0) throw ShapeError("area_matrix: empty extent");
  Tensor m({out_size, in_size});
  const double ratio = static_cast<double>(in_size) / static_cast<double>(out_size);
  for (std::size_t o = 0; o < out_size; ++o) {
    const double lo = static_cast<double>(o) * ratio, hi = lo + ratio;
    for (auto i = static_cast<std::size_t>(std::floor(lo)); i < in_size && static_cast<double>(i) < hi; ++i) {
      const double overlap = std::min(hi, static_cast<double>(i + 1)) - std::max(lo, static_cast<double>(i));
      if (overlap > 0.0) m[o * in_size + i] = overlap / ratio;
    }
  }
  return m;
}

Var resample_separable(const Var& x, const Tensor& rows, const Tensor& cols) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("resample_separable expects NCHW, got " + to_string(s));
  if (rows.rank() != 2 || cols.rank() != 2 || rows.shape()[1] != s[2] || cols.shape()[1] != s[3]) {
    throw ShapeError("resample_separable: matrices " + to_string(rows.shape()) + ", " +
                     to_string(cols.shape()) + " do not match input " + to_string(s));
  }
  const std::size_t maps = s[0] * s[1], H = s[2], W = s[3];
  const std::size_t oh = rows.shape()[0], ow = cols.shape()[0];
  Tensor out({s[0], s[1], oh, ow}, x.dtype());
  ConstMapMat r(rows.data(), oh, H), c(cols.data(), ow, W);
  RowMat tmp(H, ow);
  for (std::size_t m = 0; m < maps; ++m) {
    tmp.noalias() = ConstMapMat(x.value().data() + m * H * W, H, W) * c.transpose();
    MapMat(out.data() + m * oh * ow, oh, ow).noalias() = r * tmp;
  }
  return record(std::move(out), {x}, "resample_separable",
                [rows, cols, maps, H, W, oh, ow](const Tensor& g, GradSink& sink) {
                  ConstMapMat r(rows.data(), oh, H), c(cols.data(), ow, W);
                  RowMat tmp(H, ow);
                  double* d = sink.at(0).data();
                  for (std::size_t m = 0; m < maps; ++m) {
                    tmp.noalias() = r.transpose() * ConstMapMat(g.data() + m * oh * ow, oh, ow);
                    MapMat(d + m * H * W, H, W).noalias() += tmp * c;
                  }
                });
}

Var upsample_bicubic(const Var& x, double scale) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("upsample_bicubic expects NCHW, got " + to_string(s));
  const std::size_t oh = scaled_extent(s[2], scale), ow = scaled_extent(s[3], scale);
  return resample_separable(x, bicubic_matrix(s[2], oh, scale), bicubic_matrix(s[3], ow, scale));
}

Var resize_area(const Var& x, std::size_t out_h, std::size_t out_w) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("resize_area expects NCHW, got " + to_string(s));
  return resample_separable(x, area_matrix(s[2], out_h), area_matrix(s[3], out_w));
}

}  // namespace mfsr::ndgrad
