#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mfsr/hrnet/layers.hpp"
#include "mfsr/scenes/scene.hpp"

namespace mfsr::hrnet {

using ndgrad::Tensor;

/// One row of a per-layer parameter table.
struct ParamRow {
  std::string stage;
  std::string layer;
  std::size_t count = 0;
};

std::size_t total(const std::vector<ParamRow>& rows, const std::string& stage = {});

struct HighResNetConfig {
  std::size_t in_channels = 1;
  std::size_t hidden = 64;
  std::size_t zoom = 3;
  std::size_t kernel = 3;
  bool use_global_residual = false;
};

/// Hidden states of a batch of views, one row per view, with validity flags
/// (0 marks zero padding).
struct EncodedState {
  Var state;
  std::vector<std::uint8_t> alpha;
};

/// Views of B image sets, stacked view-major: row k*B + b holds view k of
/// set b. Every set has the same K, a power of two.
struct ViewBatch {
  Tensor views;                      ///< [K*B, C, H, W]
  Tensor reference;                  ///< [B, C, H, W]
  std::vector<std::uint8_t> alpha;   ///< K*B flags
  std::size_t sets = 1;
};

/// Stacks padded sets (each with alpha flags) and their references.
ViewBatch make_view_batch(const std::vector<scenes::PaddedSet>& sets, const std::vector<Tensor>& references);

class HighResNet {
 public:
  explicit HighResNet(const HighResNetConfig& cfg = {}, Dtype dtype = Dtype::f32, std::uint64_t seed = 0);

  const HighResNetConfig& config() const { return cfg_; }
  ParameterStore& params() { return *store_; }
  const ParameterStore& params() const { return *store_; }

  /// Joint embedding of each view with its reference: [N,C,H,W] x2 -> [N,Ch,H,W].
  Var encode(const Var& views, const Var& references) const;
  /// s_i + alpha_j f(g([s_i, s_j])); rows with alpha_j = 0 return s_i exactly.
  EncodedState fuse_pair(const EncodedState& si, const EncodedState& sj) const;
  /// [B,Ch,H,W] -> [B,C,zoom H,zoom W]. `references` is used only with the
  /// global residual and may be empty otherwise.
  Var decode(const Var& state, const Var& references) const;

  /// Encode, log2 K fusion levels pairing view i with view K-1-i, decode.
  Var forward(const ViewBatch& batch) const;

  std::vector<ParamRow> parameter_table() const;

 private:
  HighResNetConfig cfg_;
  std::unique_ptr<ParameterStore> store_;
  std::unique_ptr<Conv2d> enc_conv0_;
  std::unique_ptr<PReLU> enc_act0_;
  std::unique_ptr<ResidualBlock> enc_res0_, enc_res1_;
  std::unique_ptr<Conv2d> enc_conv1_;
  std::unique_ptr<ResidualBlock> fuse_res_;
  std::unique_ptr<Conv2d> fuse_conv_;
  std::unique_ptr<PReLU> fuse_act_;
  std::unique_ptr<ConvTranspose2d> dec_deconv_;
  std::unique_ptr<PReLU> dec_act_;
  std::unique_ptr<Conv2d> dec_conv_;
};

/// Single image set: pads to target_k views (0 selects the next power of
/// two), computes the reference over the real views, runs the network in
/// eval mode without recording. views are [C,H,W]; returns [C, zoom H, zoom W].
Tensor highresnet_forward(const HighResNet& net, const std::vector<Tensor>& views,
                          scenes::ReferenceMode reference = scenes::ReferenceMode::median, std::size_t target_k = 0);

}  // namespace mfsr::hrnet
