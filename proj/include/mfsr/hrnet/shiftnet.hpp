#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "mfsr/hrnet/highresnet.hpp"
#include "mfsr/shiftlanczos/lanczos.hpp"

namespace mfsr::hrnet {

struct ShiftNetConfig {
  std::size_t in_channels = 1;  ///< per image; the network sees two images stacked
  std::size_t input_side = 128;
  std::vector<std::size_t> channels{64, 64, 64, 64, 128, 128, 128, 128};
  /// 1-based conv layer indices followed by a 2x2 max-pool.
  std::vector<std::size_t> pool_after{2, 4, 6};
  std::size_t fc_width = 1024;
  double dropout = 0.5;
  bool fc2_bias = false;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  std::size_t flattened_size() const;
  /// Throws std::invalid_argument on an unusable plan.
  void validate() const;
};

/// Regresses the translation (dx, dy), in pixels of its input grid, that
/// aligns `image` to `reference`.
class ShiftNet {
 public:
  explicit ShiftNet(const ShiftNetConfig& cfg = {}, Dtype dtype = Dtype::f32, std::uint64_t seed = 0);

  const ShiftNetConfig& config() const { return cfg_; }
  ParameterStore& params() { return *store_; }
  const ParameterStore& params() const { return *store_; }

  /// Mean-centers each map and resamples it to input_side (area averaging
  /// when shrinking, bicubic when enlarging).
  Var preprocess(const Var& x) const;

  /// reference, image: [N, C, H, W] -> [N, 2]. Train mode updates the batch
  /// norm running statistics and applies dropout drawn from `seed`.
  Var forward(const Var& reference, const Var& image, ndgrad::Mode mode, std::uint64_t seed = 0) const;

  /// Eval-mode prediction for a single pair of [C, H, W] images.
  shiftlanczos::Shift predict(const Tensor& reference, const Tensor& image) const;

  std::vector<ParamRow> parameter_table() const;

 private:
  ShiftNetConfig cfg_;
  std::unique_ptr<ParameterStore> store_;
  std::vector<Conv2d> convs_;
  std::vector<BatchNorm2d> norms_;
  std::unique_ptr<Linear> fc1_, fc2_;
};

}  // namespace mfsr::hrnet
