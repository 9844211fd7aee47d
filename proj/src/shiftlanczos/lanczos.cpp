#include "mfsr/shiftlanczos/lanczos.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mfsr/kelvin/metrics.hpp"

namespace mfsr::shiftlanczos {

using ndgrad::ShapeError;

namespace {

constexpr double kPi = std::numbers::pi;

bool is_integer(double x) { return x == std::floor(x); }

double sinc(double x) {
  if (x == 0.0) return 1.0;
  if (is_integer(x)) return 0.0;
  return std::sin(kPi * x) / (kPi * x);
}

double sinc_derivative(double x) {
  if (std::abs(x) < 1e-4) return -kPi * kPi * x / 3.0;
  return (std::cos(kPi * x) - sinc(x)) / x;
}

void check_support(int a) {
  if (a < 1) throw std::invalid_argument("lanczos support a must be >= 1, got " + std::to_string(a));
}

void split(double delta, double& m, double& f) {
  if (!std::isfinite(delta)) throw std::invalid_argument("lanczos_kernel: non-finite shift");
  m = std::floor(delta + 0.5);
  f = delta - m;
}

int reflect101(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  long k = i % period;
  if (k < 0) k += period;
  if (k >= n) k = period - k;
  return static_cast<int>(k);
}

// One separable pass over `planes` [H, W] maps. Forward:
//   out[.., x] = sum_i w[i] in[.., reflect(x - anchor - i)]
// along columns (horizontal) or rows (vertical). The adjoint scatters
// instead; both accumulate into `out`.
void pass(const double* in, double* out, std::size_t planes, std::size_t H, std::size_t W, bool horizontal,
          const std::vector<double>& w, int anchor, bool adjoint) {
  const std::size_t len = horizontal ? W : H;
  const std::size_t lines = horizontal ? H : W;
  const std::size_t step = horizontal ? 1 : W;
  const std::size_t line_step = horizontal ? W : 1;
  std::vector<int> src(len * w.size());
  for (std::size_t x = 0; x < len; ++x) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      src[x * w.size() + i] =
          reflect101(static_cast<long>(x) - anchor - static_cast<long>(i), static_cast<long>(len));
    }
  }
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t l = 0; l < lines; ++l) {
      const std::size_t base = p * H * W + l * line_step;
      const double* li = in + base;
      double* lo = out + base;
      for (std::size_t x = 0; x < len; ++x) {
        const int* s = &src[x * w.size()];
        if (!adjoint) {
          double acc = 0.0;
          for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] != 0.0) acc += w[i] * li[s[i] * step];
          }
          lo[x * step] += acc;
        } else {
          const double g = li[x * step];
          for (std::size_t i = 0; i < w.size(); ++i) lo[s[i] * step] += w[i] * g;
        }
      }
    }
  }
}

void require_shift_within(double v, double limit, const char* axis) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string("shift ") + axis + " is not finite");
  if (std::abs(v) > limit) {
    throw std::invalid_argument(std::string("shift ") + axis + " = " + std::to_string(v) + " exceeds max_shift " +
                                std::to_string(limit));
  }
}

}  // namespace

double lanczos_window(double x, int a) {
  check_support(a);
  if (std::abs(x) >= a) return 0.0;
  return sinc(x) * sinc(x / a);
}

double lanczos_window_derivative(double x, int a) {
  check_support(a);
  if (std::abs(x) >= a) return 0.0;
  return sinc_derivative(x) * sinc(x / a) + sinc(x) * sinc_derivative(x / a) / a;
}

LanczosKernel lanczos_kernel(double delta, int a) {
  check_support(a);
  double m, f;
  split(delta, m, f);
  LanczosKernel k;
  k.a = a;
  k.anchor = static_cast<int>(m) - a;
  k.taps.resize(2 * a + 1);
  double total = 0.0;
  for (int j = -a; j <= a; ++j) {
    const double v = lanczos_window(j - f, a);
    k.taps[j + a] = v;
    total += v;
  }
  for (double& t : k.taps) t /= total;
  return k;
}

std::vector<double> lanczos_kernel_derivative(double delta, int a) {
  check_support(a);
  double m, f;
  split(delta, m, f);
  std::vector<double> L(2 * a + 1), dL(2 * a + 1);
  double S = 0.0, dS = 0.0;
  for (int j = -a; j <= a; ++j) {
    L[j + a] = lanczos_window(j - f, a);
    dL[j + a] = -lanczos_window_derivative(j - f, a);  // d/df of L(j - f)
    S += L[j + a];
    dS += dL[j + a];
  }
  std::vector<double> out(2 * a + 1);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (dL[i] * S - L[i] * dS) / (S * S);
  return out;
}

Tensor shift_image(const Tensor& img, Shift s, const ShiftOptions& opts) {
  if (img.rank() < 2) throw ShapeError("shift_image: need at least 2 dimensions");
  require_shift_within(s.dx, opts.max_shift, "dx");
  require_shift_within(s.dy, opts.max_shift, "dy");
  const std::size_t H = img.dim(img.rank() - 2), W = img.dim(img.rank() - 1);
  const std::size_t planes = H * W == 0 ? 0 : img.numel() / (H * W);
  const auto kx = lanczos_kernel(s.dx, opts.a);
  const auto ky = lanczos_kernel(s.dy, opts.a);
  Tensor tmp(img.shape(), ndgrad::Dtype::f64), out(img.shape(), img.dtype());
  pass(img.data(), tmp.data(), planes, H, W, true, kx.taps, kx.anchor, false);
  pass(tmp.data(), out.data(), planes, H, W, false, ky.taps, ky.anchor, false);
  out.round_to_dtype();
  ndgrad::require_finite(out, "shift_image");
  return out;
}

Var shift_images(const Var& img, const Var& shifts, int a, bool differentiable_kernel) {
  check_support(a);
  const auto& xs = img.shape();
  if (xs.size() != 4) throw ShapeError("shift_images: image must be [N,C,H,W], got " + ndgrad::to_string(xs));
  const std::size_t N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  if (shifts.shape() != ndgrad::Shape{N, 2}) {
    throw ShapeError("shift_images: shifts must be [" + std::to_string(N) + ",2], got " +
                     ndgrad::to_string(shifts.shape()));
  }
  const std::size_t per = C * H * W;
  std::vector<LanczosKernel> kx(N), ky(N);
  Tensor out(xs, img.dtype());
  auto tmp = std::make_shared<Tensor>(xs);
  for (std::size_t n = 0; n < N; ++n) {
    kx[n] = lanczos_kernel(shifts.value()[2 * n], a);
    ky[n] = lanczos_kernel(shifts.value()[2 * n + 1], a);
    pass(img.value().data() + n * per, tmp->data() + n * per, C, H, W, true, kx[n].taps, kx[n].anchor, false);
    pass(tmp->data() + n * per, out.data() + n * per, C, H, W, false, ky[n].taps, ky[n].anchor, false);
  }
  return ndgrad::record(
      std::move(out), {img, shifts}, "shift_images",
      [img, shifts, tmp, kx, ky, N, C, H, W, per, a, differentiable_kernel](const Tensor& g, ndgrad::GradSink& sink) {
        const bool want_img = sink.wants(0);
        const bool want_shift = differentiable_kernel && sink.wants(1);
        if (!want_img && !want_shift) return;
        std::vector<double> gv(per), work(per);
        for (std::size_t n = 0; n < N; ++n) {
          // gv = adjoint of the vertical pass applied to the output gradient.
          std::fill(gv.begin(), gv.end(), 0.0);
          pass(g.data() + n * per, gv.data(), C, H, W, false, ky[n].taps, ky[n].anchor, true);
          if (want_img) {
            pass(gv.data(), sink.at(0).data() + n * per, C, H, W, true, kx[n].taps, kx[n].anchor, true);
          }
          if (want_shift) {
            const double dx = shifts.value()[2 * n], dy = shifts.value()[2 * n + 1];
            // d/d dx: <gv, Hpass'(img)>
            std::fill(work.begin(), work.end(), 0.0);
            pass(img.value().data() + n * per, work.data(), C, H, W, true, lanczos_kernel_derivative(dx, a),
                 kx[n].anchor, false);
            double sx = 0.0;
            for (std::size_t i = 0; i < per; ++i) sx += gv[i] * work[i];
            // d/d dy: <g, Vpass'(tmp)>
            std::fill(work.begin(), work.end(), 0.0);
            pass(tmp->data() + n * per, work.data(), C, H, W, false, lanczos_kernel_derivative(dy, a),
                 ky[n].anchor, false);
            double sy = 0.0;
            for (std::size_t i = 0; i < per; ++i) sy += g[n * per + i] * work[i];
            auto& gs = sink.at(1);
            gs[2 * n] += sx;
            gs[2 * n + 1] += sy;
          }
        }
      });
}

namespace {

Var base_loss(const Var& sr, const Tensor& hr, const Tensor& mask, const RegisteredLossOptions& opts) {
  const auto& s = sr.shape();
  if (s.size() != 4) throw ShapeError("registered loss: sr must be [N,C,H,W]");
  if (hr.shape() != s || mask.shape() != s) throw ShapeError("registered loss: sr, hr and mask shapes differ");
  const std::size_t b = opts.border, H = s[2], W = s[3];
  if (H <= 2 * b || W <= 2 * b) throw ShapeError("registered loss: image smaller than the border crop");
  const std::size_t h = H - 2 * b, w = W - 2 * b;
  Var sr_c = b == 0 ? sr : ndgrad::crop2d(sr, b, b, h, w);
  Tensor hr_c = b == 0 ? hr : kelvin::crop_spatial(hr, b, b, h, w);
  Tensor m_c = b == 0 ? mask : kelvin::crop_spatial(mask, b, b, h, w);
  return opts.kind == LossKind::clear_bias_mse ? kelvin::clear_mse_loss(sr_c, hr_c, m_c)
                                               : kelvin::masked_mse_loss(sr_c, hr_c, m_c);
}

}  // namespace

Var unregistered_loss(const Var& sr, const Tensor& hr, const Tensor& mask, const RegisteredLossOptions& opts) {
  return base_loss(sr, hr, mask, opts);
}

RegisteredLoss registered_loss(const Var& sr, const Tensor& hr, const Tensor& mask, const ShiftPredictor& predictor,
                               const RegisteredLossOptions& opts) {
  if (sr.shape().size() != 4) throw ShapeError("registered loss: sr must be [N,C,H,W]");
  if (hr.shape() != sr.shape() || mask.shape() != sr.shape()) {
    throw ShapeError("registered loss: sr, hr and mask shapes differ");
  }
  RegisteredLoss out;
  out.shifts = predictor(sr, hr);
  Var limited = ndgrad::clamp(out.shifts, -opts.max_shift, opts.max_shift);
  Var shifted = shift_images(sr, limited, opts.a, opts.differentiable_kernel);
  out.base = base_loss(shifted, hr, mask, opts);
  out.total = opts.lambda == 0.0
                  ? out.base
                  : ndgrad::add(out.base, ndgrad::scale(ndgrad::mean(ndgrad::row_norms(out.shifts)), opts.lambda));
  return out;
}

}  // namespace mfsr::shiftlanczos
