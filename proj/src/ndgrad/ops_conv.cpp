#include <Eigen/Core>
#include <algorithm>

#include "mfsr/ndgrad/ops.hpp"

namespace mfsr::ndgrad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvGeometry {
  std::size_t channels, height, width, k, stride, pad, out_h, out_w;
  std::size_t col_rows() const { return channels * k * k; }
  std::size_t col_cols() const { return out_h * out_w; }
};

// Unfolds one [C, H, W] image into [C*k*k, out_h*out_w] patch columns.
void im2col(const double* img, const ConvGeometry& g, double* cols) {
  const std::size_t hw = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        double* row = cols + ((c * g.k + ky) * g.k + kx) * hw;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          double* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill_n(dst, g.out_w, 0.0);
            continue;
          }
          const double* src = img + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patch columns back into the image.
void col2im(const double* cols, const ConvGeometry& g, double* img) {
  const std::size_t hw = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const double* row = cols + ((c * g.k + ky) * g.k + kx) * hw;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          double* dst = img + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          const double* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

void check_bias(const Var& b, std::size_t channels, const char* op) {
  if (b && (b.shape().size() != 1 || b.shape()[0] != channels)) {
    throw ShapeError(std::string(op) + ": bias shape " + to_string(b.shape()) + " does not match " +
                     std::to_string(channels) + " output channels");
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, std::size_t stride, std::size_t pad) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4) throw ShapeError("conv2d: input must be [N,Cin,H,W], got " + to_string(xs));
  if (ws.size() != 4 || ws[2] != ws[3]) {
    throw ShapeError("conv2d: weight must be [Cout,Cin,k,k], got " + to_string(ws));
  }
  if (ws[1] != xs[1]) {
    throw ShapeError("conv2d: input has " + std::to_string(xs[1]) + " channels but weight expects " +
                     std::to_string(ws[1]));
  }
  const std::size_t k = ws[2];
  if (k < 1 || stride < 1) throw ShapeError("conv2d: kernel and stride must be >= 1");
  if (xs[2] + 2 * pad < k || xs[3] + 2 * pad < k) {
    throw ShapeError("conv2d: padded input " + to_string(xs) + " smaller than kernel " + std::to_string(k));
  }
  check_bias(b, ws[0], "conv2d");

  const std::size_t n = xs[0], cout = ws[0];
  const ConvGeometry geo{xs[1], xs[2], xs[3], k, stride, pad, (xs[2] + 2 * pad - k) / stride + 1,
                         (xs[3] + 2 * pad - k) / stride + 1};
  Dtype dtype = promote(x.dtype(), w.dtype());
  if (b) dtype = promote(dtype, b.dtype());
  Tensor out({n, cout, geo.out_h, geo.out_w}, dtype);

  const std::size_t in_size = geo.channels * geo.height * geo.width;
  const std::size_t out_size = cout * geo.col_cols();
  RowMat cols(geo.col_rows(), geo.col_cols());
  ConstMapMat wm(w.value().data(), cout, geo.col_rows());
  for (std::size_t i = 0; i < n; ++i) {
    im2col(x.value().data() + i * in_size, geo, cols.data());
    MapMat om(out.data() + i * out_size, cout, geo.col_cols());
    om.noalias() = wm * cols;
    if (b) om.colwise() += Eigen::Map<const Eigen::VectorXd>(b.value().data(), cout);
  }

  std::vector<Var> inputs{x, w};
  if (b) inputs.push_back(b);
  return record(std::move(out), std::move(inputs), "conv2d",
                [x, w, geo, n, cout, in_size, out_size, has_bias = static_cast<bool>(b)](
                    const Tensor& g, GradSink& sink) {
                  ConstMapMat wm(w.value().data(), cout, geo.col_rows());
                  RowMat cols(geo.col_rows(), geo.col_cols());
                  const bool want_x = sink.wants(0), want_w = sink.wants(1);
                  const bool want_b = has_bias && sink.wants(2);
                  for (std::size_t i = 0; i < n; ++i) {
                    ConstMapMat gm(g.data() + i * out_size, cout, geo.col_cols());
                    if (want_w) {
                      im2col(x.value().data() + i * in_size, geo, cols.data());
                      MapMat(sink.at(1).data(), cout, geo.col_rows()).noalias() += gm * cols.transpose();
                    }
                    if (want_b) {
                      Eigen::Map<Eigen::VectorXd>(sink.at(2).data(), cout) += gm.rowwise().sum();
                    }
                    if (want_x) {
                      cols.noalias() = wm.transpose() * gm;
                      col2im(cols.data(), geo, sink.at(0).data() + i * in_size);
                    }
                  }
                });
}

Var conv_transpose2d(const Var& x, const Var& w, const Var& b, std::size_t stride) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4) throw ShapeError("conv_transpose2d: input must be [N,Cin,H,W], got " + to_string(xs));
  if (ws.size() != 4 || ws[2] != ws[3]) {
    throw ShapeError("conv_transpose2d: weight must be [Cin,Cout,k,k], got " + to_string(ws));
  }
  if (ws[0] != xs[1]) {
    throw ShapeError("conv_transpose2d: input has " + std::to_string(xs[1]) +
                     " channels but weight expects " + std::to_string(ws[0]));
  }
  const std::size_t k = ws[2];
  if (k < 1 || stride < 1) throw ShapeError("conv_transpose2d: kernel and stride must be >= 1");
  const std::size_t cout = ws[1];
  check_bias(b, cout, "conv_transpose2d");

  const std::size_t n = xs[0], cin = xs[1], h = xs[2], wd = xs[3];
  const std::size_t oh = (h - 1) * stride + k, ow = (wd - 1) * stride + k;
  // Output geometry seen as the input of the conv2d this op is adjoint to.
  const ConvGeometry geo{cout, oh, ow, k, stride, 0, h, wd};
  Dtype dtype = promote(x.dtype(), w.dtype());
  if (b) dtype = promote(dtype, b.dtype());
  Tensor out({n, cout, oh, ow}, dtype);

  const std::size_t in_size = cin * h * wd, out_size = cout * oh * ow;
  ConstMapMat wm(w.value().data(), cin, geo.col_rows());
  RowMat cols(geo.col_rows(), geo.col_cols());
  for (std::size_t i = 0; i < n; ++i) {
    ConstMapMat xm(x.value().data() + i * in_size, cin, h * wd);
    cols.noalias() = wm.transpose() * xm;
    double* o = out.data() + i * out_size;
    col2im(cols.data(), geo, o);
    if (b) {
      for (std::size_t c = 0; c < cout; ++c) {
        for (std::size_t p = 0; p < oh * ow; ++p) o[c * oh * ow + p] += b.value()[c];
      }
    }
  }

  std::vector<Var> inputs{x, w};
  if (b) inputs.push_back(b);
  return record(std::move(out), std::move(inputs), "conv_transpose2d",
                [x, w, geo, n, cin, in_size, out_size, has_bias = static_cast<bool>(b)](
                    const Tensor& g, GradSink& sink) {
                  ConstMapMat wm(w.value().data(), cin, geo.col_rows());
                  RowMat cols(geo.col_rows(), geo.col_cols());
                  const bool want_x = sink.wants(0), want_w = sink.wants(1);
                  const bool want_b = has_bias && sink.wants(2);
                  const std::size_t plane = geo.height * geo.width;
                  for (std::size_t i = 0; i < n; ++i) {
                    const double* gi = g.data() + i * out_size;
                    im2col(gi, geo, cols.data());
                    if (want_x) {
                      MapMat(sink.at(0).data() + i * in_size, cin, geo.col_cols()).noalias() += wm * cols;
                    }
                    if (want_w) {
                      ConstMapMat xm(x.value().data() + i * in_size, cin, geo.col_cols());
                      MapMat(sink.at(1).data(), cin, geo.col_rows()).noalias() += xm * cols.transpose();
                    }
                    if (want_b) {
                      double* db = sink.at(2).data();
                      for (std::size_t c = 0; c < geo.channels; ++c) {
                        double s = 0.0;
                        for (std::size_t p = 0; p < plane; ++p) s += gi[c * plane + p];
                        db[c] += s;
                      }
                    }
                  }
                });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1]) {
    throw ShapeError("linear: input " + to_string(xs) + " incompatible with weight " + to_string(ws));
  }
  const std::size_t n = xs[0], din = xs[1], dout = ws[0];
  check_bias(b, dout, "linear");
  Dtype dtype = promote(x.dtype(), w.dtype());
  if (b) dtype = promote(dtype, b.dtype());
  Tensor out({n, dout}, dtype);
  ConstMapMat xm(x.value().data(), n, din);
  ConstMapMat wm(w.value().data(), dout, din);
  MapMat om(out.data(), n, dout);
  om.noalias() = xm * wm.transpose();
  if (b) om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.value().data(), dout);

  std::vector<Var> inputs{x, w};
  if (b) inputs.push_back(b);
  return record(std::move(out), std::move(inputs), "linear",
                [x, w, n, din, dout, has_bias = static_cast<bool>(b)](const Tensor& g, GradSink& sink) {
                  ConstMapMat gm(g.data(), n, dout);
                  if (sink.wants(0)) {
                    MapMat(sink.at(0).data(), n, din).noalias() +=
                        gm * ConstMapMat(w.value().data(), dout, din);
                  }
                  if (sink.wants(1)) {
                    MapMat(sink.at(1).data(), dout, din).noalias() +=
                        gm.transpose() * ConstMapMat(x.value().data(), n, din);
                  }
                  if (has_bias && sink.wants(2)) {
                    Eigen::Map<Eigen::RowVectorXd>(sink.at(2).data(), dout) += gm.colwise().sum();
                  }
                });
}

}  // namespace mfsr::ndgrad
