#include "mfsr/baselines/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace mfsr::baselines {

Method parse_method(const std::string& text) {
  if (text == "esa") return Method::esa;
  if (text == "bicubic") return Method::bicubic;
  throw std::invalid_argument("unknown baseline method '" + text + "' (expected esa or bicubic)");
}

Tensor bicubic_upsample(const Tensor& view, std::size_t zoom) {
  if (view.rank() != 3) throw ndgrad::ShapeError("bicubic_upsample: view must be [C,h,w]");
  if (zoom == 0) throw std::invalid_argument("bicubic_upsample: zoom must be positive");
  ndgrad::NoGradGuard no_grad;
  const auto& s = view.shape();
  const Tensor out = ndgrad::upsample_bicubic(ndgrad::constant(view.reshape({1, s[0], s[1], s[2]})),
                                              static_cast<double>(zoom))
                         .value();
  return out.reshape({s[0], s[1] * zoom, s[2] * zoom});
}

Tensor esa_baseline(const Scene& scene, std::size_t n_clearest) {
  if (scene.lr_views.empty()) throw std::invalid_argument("esa_baseline: scene '" + scene.id + "' has no views");
  if (n_clearest == 0) throw std::invalid_argument("esa_baseline: n_clearest must be >= 1");
  const auto order = scenes::clearest_first(scenes::clearance(scene));
  const std::size_t n = std::min(n_clearest, order.size());
  Tensor acc;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor up = bicubic_upsample(scene.lr_views[order[i]], scene.zoom);
    if (acc.empty()) {
      acc = std::move(up);
    } else {
      for (std::size_t p = 0; p < acc.numel(); ++p) acc[p] += up[p];
    }
  }
  for (double& v : acc.values()) v /= static_cast<double>(n);
  return acc;
}

Tensor bicubic_sisr(const Scene& scene) { return esa_baseline(scene, 1); }

Tensor run_baseline(const Scene& scene, const BaselineConfig& cfg) {
  return cfg.method == Method::esa ? esa_baseline(scene, cfg.n_clearest) : bicubic_sisr(scene);
}

Tensor shift_and_add(const Scene& scene, const std::vector<shiftlanczos::Shift>& shifts) {
  scenes::validate(scene);
  if (shifts.size() != scene.num_views()) throw std::invalid_argument("shift_and_add: one shift per view required");
  const double z = static_cast<double>(scene.zoom);
  Tensor sum, weight, fallback;
  for (std::size_t i = 0; i < scene.num_views(); ++i) {
    const shiftlanczos::Shift back{-shifts[i].dx * z, -shifts[i].dy * z};
    const shiftlanczos::ShiftOptions opts{3, std::max(std::abs(back.dx), std::abs(back.dy)) + 1.0};
    const Tensor up = shiftlanczos::shift_image(bicubic_upsample(scene.lr_views[i], scene.zoom), back, opts);
    // Upsampled mask, moved by the rounded shift and thresholded at 0.5.
    const Tensor m = bicubic_upsample(scene.quality_maps[i], scene.zoom);
    const Tensor mm = shiftlanczos::shift_image(m, {std::round(back.dx), std::round(back.dy)}, opts);
    if (sum.empty()) {
      sum = Tensor(up.shape());
      weight = Tensor(up.shape());
      fallback = Tensor(up.shape());
    }
    for (std::size_t p = 0; p < up.numel(); ++p) {
      const double w = mm[p] > 0.5 ? 1.0 : 0.0;
      sum[p] += w * up[p];
      weight[p] += w;
      fallback[p] += up[p];
    }
  }
  const double k = static_cast<double>(scene.num_views());
  for (std::size_t p = 0; p < sum.numel(); ++p) sum[p] = weight[p] > 0 ? sum[p] / weight[p] : fallback[p] / k;
  return sum;
}

}  // namespace mfsr::baselines
