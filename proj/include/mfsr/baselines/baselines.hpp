#pragma once

#include <string>

#include "mfsr/scenes/scene.hpp"

namespace mfsr::baselines {

using ndgrad::Tensor;
using scenes::Scene;

enum class Method { esa, bicubic };
Method parse_method(const std::string& text);

struct BaselineConfig {
  Method method = Method::esa;
  std::size_t n_clearest = 9;
};

/// Bicubic upsampling of a [C, h, w] image by `zoom`.
Tensor bicubic_upsample(const Tensor& view, std::size_t zoom);

/// Average of the bicubic-upsampled n clearest views (ties by index). When
/// the scene has fewer views, all of them are used.
Tensor esa_baseline(const Scene& scene, std::size_t n_clearest = 9);

/// Bicubic upsampling of the clearest view.
Tensor bicubic_sisr(const Scene& scene);

Tensor run_baseline(const Scene& scene, const BaselineConfig& cfg);

/// Classical shift-and-add with known per-view shifts (low-res pixels):
/// each view is upsampled, shifted back into the high-res frame and the
/// clear pixels are averaged. Pixels clear in no view fall back to the mean
/// of all views.
Tensor shift_and_add(const Scene& scene, const std::vector<shiftlanczos::Shift>& shifts);

}  // namespace mfsr::baselines
