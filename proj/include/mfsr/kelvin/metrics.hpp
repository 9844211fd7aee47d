#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mfsr/ndgrad/ops.hpp"

namespace mfsr::kelvin {

using ndgrad::Tensor;
using ndgrad::Var;

// Images are arrays whose last two extents are spatial (H, W); any leading
// extents are treated as channels. Masks hold 1 for clear pixels, 0 otherwise,
// and have the same shape as the images they gate.

/// Smallest cMSE considered; caps cPSNR at 100 dB.
inline constexpr double kMseFloor = 1e-10;

/// Mean of (hr - sr) over clear pixels. Throws if no pixel is clear.
double brightness_bias(const Tensor& hr, const Tensor& sr, const Tensor& mask);

/// Mean over clear pixels of (hr - sr - b)^2 with b the brightness bias.
double clear_mse(const Tensor& hr, const Tensor& sr, const Tensor& mask);

/// -10 log10(max(clear_mse, 1e-10)), in dB.
double cpsnr(const Tensor& hr, const Tensor& sr, const Tensor& mask);

/// sr is cropped by `border` on each side; hr and mask are cropped to the
/// same size at every offset (u, v) in [0, 2 border]^2 and the best cPSNR
/// is returned. Offset (border, border) is the centered comparison.
double registered_cpsnr(const Tensor& hr, const Tensor& sr, const Tensor& mask, int border = 3);

/// Crops the spatial window [top, top+h) x [left, left+w) of every channel.
Tensor crop_spatial(const Tensor& img, std::size_t top, std::size_t left, std::size_t h, std::size_t w);

struct SceneScore {
  std::string scene_id;
  double cpsnr_db = 0.0;
  double baseline_cpsnr_db = 0.0;
  double normalized_score = 0.0;  ///< baseline / model; below 1 beats the baseline
};

struct ScoreReport {
  std::vector<SceneScore> scenes;  ///< sorted by scene id
  double aggregate = 0.0;          ///< mean normalized score

  double mean_cpsnr() const;
  double mean_baseline_cpsnr() const;
};

/// Mean over scenes of baseline_cpsnr / model_cpsnr. Both maps must hold the
/// same scene ids.
double leaderboard_score(const std::map<std::string, double>& model,
                         const std::map<std::string, double>& baseline);

ScoreReport make_report(const std::map<std::string, double>& model, const std::map<std::string, double>& baseline);

/// CSV with header scene_id,cpsnr_db,baseline_cpsnr_db,normalized_score.
void write_csv(const ScoreReport& report, std::ostream& out);
void save_csv(const ScoreReport& report, const std::string& path);

// ---- differentiable losses --------------------------------------------------

/// Brightness-bias-corrected clear MSE for batched [N, ...] predictions,
/// averaged over the N samples. Samples without clear pixels contribute 0.
Var clear_mse_loss(const Var& sr, const Tensor& hr, const Tensor& mask);

/// Plain MSE over clear pixels, averaged over the N samples.
Var masked_mse_loss(const Var& sr, const Tensor& hr, const Tensor& mask);

}  // namespace mfsr::kelvin
