#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mfsr/hrnet/shiftnet.hpp"
#include "mfsr/shiftlanczos/lanczos.hpp"

namespace mfsr::trainer {

/// Training and evaluation settings. Defaults are the desk-scale setup;
/// paper_scale() returns the full-size counterpart.
struct TrainConfig {
  // optimizer and schedule
  double lr = 0.0007;
  double lr_decay = 0.97;
  std::size_t patience = 2;
  double plateau_threshold = 1e-4;  ///< relative improvement that resets patience
  std::size_t batch = 8;
  std::size_t epochs = 30;
  std::size_t max_steps = 0;  ///< stop after this many steps; 0 = no limit

  // data
  std::size_t views = 8;  ///< K views per example (power of two)
  std::size_t patch = 24; ///< low-res patch side
  double beta = 50.0;
  scenes::ReferenceMode reference = scenes::ReferenceMode::median;
  std::size_t val_percent = 10;
  bool mask_loss = true;  ///< gate the loss with the HR status map

  // loss
  bool registered_loss = true;
  shiftlanczos::LossKind loss = shiftlanczos::LossKind::clear_bias_mse;
  double lambda = 1e-6;
  bool differentiable_kernel = true;
  int lanczos_a = 3;
  double max_shift = 10.0;
  std::size_t border = 3;

  // networks
  std::size_t hidden = 16;
  bool global_residual = false;
  std::vector<std::size_t> shiftnet_channels{16, 16, 16, 16, 32, 32, 32, 32};
  std::size_t shiftnet_fc = 128;
  std::size_t shiftnet_side = 0;  ///< 0 = high-res patch side
  double shiftnet_dropout = 0.5;
  ndgrad::Dtype dtype = ndgrad::Dtype::f32;

  // evaluation
  std::size_t eval_views = 0;  ///< clearest views fed at eval; 0 = same as `views`
  std::size_t eval_pad = 32;
  std::size_t n_clearest = 9;
  int eval_border = 3;

  std::uint64_t seed = 1;

  static TrainConfig paper_scale();
  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

using ConfigMap = std::map<std::string, std::string>;

/// Parses "key = value" lines; '#' starts a comment.
ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::filesystem::path& path);

/// Applies overrides; unknown keys throw std::invalid_argument.
void apply(TrainConfig& cfg, const ConfigMap& values);
ConfigMap to_map(const TrainConfig& cfg);
void write_config_file(const TrainConfig& cfg, const std::filesystem::path& path);

hrnet::HighResNetConfig highresnet_config(const TrainConfig& cfg, std::size_t zoom);
hrnet::ShiftNetConfig shiftnet_config(const TrainConfig& cfg, std::size_t zoom);

}  // namespace mfsr::trainer
