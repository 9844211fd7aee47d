#include <cmath>
#include <limits>
#include <random>

#include "mfsr/ndgrad/ops.hpp"

namespace mfsr::ndgrad {

Var prelu(const Var& x, const Var& slope) {
  if (slope.value().numel() != 1) {
    throw ShapeError("prelu: slope must hold a single shared value, got " + to_string(slope.shape()));
  }
  const double a = slope.value()[0];
  Tensor out(x.shape(), promote(x.dtype(), slope.dtype()));
  auto xv = x.value().values();
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : a * xv[i];
  return record(std::move(out), {x, slope}, "prelu", [x, a](const Tensor& g, GradSink& sink) {
    auto xv = x.value().values();
    if (sink.wants(0)) {
      auto d = sink.at(0).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += xv[i] > 0.0 ? g[i] : a * g[i];
    }
    if (sink.wants(1)) {
      double s = 0.0;
      for (std::size_t i = 0; i < xv.size(); ++i) {
        if (xv[i] <= 0.0) s += g[i] * xv[i];
      }
      sink.at(1)[0] += s;
    }
  });
}

Var relu(const Var& x) {
  Tensor out(x.shape(), x.dtype());
  auto xv = x.value().values();
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return record(std::move(out), {x}, "relu", [x](const Tensor& g, GradSink& sink) {
    auto xv = x.value().values();
    auto d = sink.at(0).values();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (xv[i] > 0.0) d[i] += g[i];
    }
  });
}

Var maxpool2d(const Var& x, std::size_t k, std::size_t stride) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("maxpool2d expects NCHW, got " + to_string(s));
  if (k < 1 || stride < 1 || s[2] < k || s[3] < k) {
    throw ShapeError("maxpool2d: window " + std::to_string(k) + " does not fit " + to_string(s));
  }
  const std::size_t maps = s[0] * s[1], H = s[2], W = s[3];
  const std::size_t oh = (H - k) / stride + 1, ow = (W - k) / stride + 1;
  Tensor out({s[0], s[1], oh, ow}, x.dtype());
  std::vector<std::size_t> argmax(out.numel());
  const double* xv = x.value().data();
  for (std::size_t m = 0; m < maps; ++m) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (m * H + oy * stride) * W + ox * stride;
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t idx = (m * H + oy * stride + ky) * W + ox * stride + kx;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        const std::size_t o = (m * oh + oy) * ow + ox;
        out[o] = xv[best];
        argmax[o] = best;
      }
    }
  }
  return record(std::move(out), {x}, "maxpool2d", [argmax](const Tensor& g, GradSink& sink) {
    double* d = sink.at(0).data();
    for (std::size_t o = 0; o < argmax.size(); ++o) d[argmax[o]] += g[o];
  });
}

Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, Mode mode) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("batchnorm2d expects NCHW, got " + to_string(s));
  const std::size_t n = s[0], c = s[1], area = s[2] * s[3];
  if (gamma.value().numel() != c || beta.value().numel() != c || state.running_mean.numel() != c ||
      state.running_var.numel() != c) {
    throw ShapeError("batchnorm2d: per-channel parameters must have " + std::to_string(c) + " entries");
  }
  if (mode == Mode::train && n < 2) {
    throw ShapeError("batchnorm2d: train mode needs a batch of at least 2, got " + std::to_string(n));
  }
  const auto count = static_cast<double>(n * area);
  std::vector<double> mu(c), inv_std(c);
  const double* xv = x.value().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (mode == Mode::train) {
      double m = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t p = 0; p < area; ++p) m += xv[(b * c + ch) * area + p];
      }
      m /= count;
      double v = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t p = 0; p < area; ++p) {
          const double dlt = xv[(b * c + ch) * area + p] - m;
          v += dlt * dlt;
        }
      }
      v /= count;
      mu[ch] = m;
      inv_std[ch] = 1.0 / std::sqrt(v + state.eps);
      const double unbiased = count > 1 ? v * count / (count - 1) : v;
      state.running_mean[ch] = (1.0 - state.momentum) * state.running_mean[ch] + state.momentum * m;
      state.running_var[ch] = (1.0 - state.momentum) * state.running_var[ch] + state.momentum * unbiased;
    } else {
      mu[ch] = state.running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(state.running_var[ch] + state.eps);
    }
  }
  state.running_mean.round_to_dtype();
  state.running_var.round_to_dtype();

  Dtype dtype = promote(x.dtype(), promote(gamma.dtype(), beta.dtype()));
  Tensor xhat(s, Dtype::f64);
  Tensor out(s, dtype);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double gm = gamma.value()[ch], bt = beta.value()[ch];
      for (std::size_t p = 0; p < area; ++p) {
        const std::size_t i = (b * c + ch) * area + p;
        xhat[i] = (xv[i] - mu[ch]) * inv_std[ch];
        out[i] = gm * xhat[i] + bt;
      }
    }
  }
  const bool batch_stats = mode == Mode::train;
  return record(std::move(out), {x, gamma, beta}, "batchnorm2d",
                [xhat = std::move(xhat), inv_std, gamma, n, c, area, count, batch_stats](
                    const Tensor& g, GradSink& sink) {
                  std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
                  for (std::size_t b = 0; b < n; ++b) {
                    for (std::size_t ch = 0; ch < c; ++ch) {
                      for (std::size_t p = 0; p < area; ++p) {
                        const std::size_t i = (b * c + ch) * area + p;
                        sum_g[ch] += g[i];
                        sum_gx[ch] += g[i] * xhat[i];
                      }
                    }
                  }
                  if (sink.wants(1)) {
                    for (std::size_t ch = 0; ch < c; ++ch) sink.at(1)[ch] += sum_gx[ch];
                  }
                  if (sink.wants(2)) {
                    for (std::size_t ch = 0; ch < c; ++ch) sink.at(2)[ch] += sum_g[ch];
                  }
                  if (!sink.wants(0)) return;
                  double* d = sink.at(0).data();
                  for (std::size_t b = 0; b < n; ++b) {
                    for (std::size_t ch = 0; ch < c; ++ch) {
                      const double k = gamma.value()[ch] * inv_std[ch];
                      for (std::size_t p = 0; p < area; ++p) {
                        const std::size_t i = (b * c + ch) * area + p;
                        if (batch_stats) {
                          d[i] += k * (g[i] - sum_g[ch] / count - xhat[i] * sum_gx[ch] / count);
                        } else {
                          d[i] += k * g[i];
                        }
                      }
                    }
                  }
                });
}

Var dropout(const Var& x, double p, Mode mode, std::uint64_t seed) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  if (mode == Mode::eval || p == 0.0) {
    return record(x.value(), {x}, "dropout", [](const Tensor& g, GradSink& sink) {
      auto d = sink.at(0).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    });
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.value().numel());
  for (double& m : mask) m = unif(rng) < p ? 0.0 : keep_scale;
  Tensor out(x.shape(), x.dtype());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = x.value()[i] * mask[i];
  return record(std::move(out), {x}, "dropout", [mask = std::move(mask)](const Tensor& g, GradSink& sink) {
    auto d = sink.at(0).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * mask[i];
  });
}

}  // namespace mfsr::ndgrad
