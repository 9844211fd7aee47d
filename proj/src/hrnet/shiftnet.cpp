#include "mfsr/hrnet/shiftnet.hpp"

#include <algorithm>

namespace mfsr::hrnet {

using ndgrad::ShapeError;

namespace {

bool pools_after(const ShiftNetConfig& cfg, std::size_t layer) {
  return std::find(cfg.pool_after.begin(), cfg.pool_after.end(), layer) != cfg.pool_after.end();
}

}  // namespace

std::size_t ShiftNetConfig::flattened_size() const {
  std::size_t side = input_side;
  for (std::size_t l = 1; l <= channels.size(); ++l) {
    if (pools_after(*this, l)) side /= 2;
  }
  return (channels.empty() ? 2 * in_channels : channels.back()) * side * side;
}

void ShiftNetConfig::validate() const {
  if (channels.empty()) throw std::invalid_argument("ShiftNetConfig: need at least one conv layer");
  if (in_channels == 0 || input_side == 0 || fc_width == 0) {
    throw std::invalid_argument("ShiftNetConfig: sizes must be positive");
  }
  for (std::size_t c : channels) {
    if (c == 0) throw std::invalid_argument("ShiftNetConfig: zero-width conv layer");
  }
  for (std::size_t l : pool_after) {
    if (l == 0 || l > channels.size()) throw std::invalid_argument("ShiftNetConfig: pool index out of range");
  }
  if (flattened_size() == 0) throw std::invalid_argument("ShiftNetConfig: input too small for the pooling plan");
  if (dropout < 0 || dropout >= 1) throw std::invalid_argument("ShiftNetConfig: dropout must be in [0,1)");
}

ShiftNet::ShiftNet(const ShiftNetConfig& cfg, Dtype dtype, std::uint64_t seed)
    : cfg_(cfg), store_(std::make_unique<ParameterStore>()) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  auto& s = *store_;
  std::size_t in = 2 * cfg_.in_channels;
  convs_.reserve(cfg_.channels.size());
  norms_.reserve(cfg_.channels.size());
  for (std::size_t l = 0; l < cfg_.channels.size(); ++l) {
    const std::string p = "layer" + std::to_string(l + 1);
    convs_.emplace_back(s, p + ".conv", in, cfg_.channels[l], 3, 1, 1, dtype, rng);
    norms_.emplace_back(s, p + ".bn", cfg_.channels[l], dtype, cfg_.bn_momentum, cfg_.bn_eps);
    in = cfg_.channels[l];
  }
  fc1_ = std::make_unique<Linear>(s, "fc1", cfg_.flattened_size(), cfg_.fc_width, dtype, rng);
  fc2_ = std::make_unique<Linear>(s, "fc2", cfg_.fc_width, 2, dtype, rng, cfg_.fc2_bias);
}

Var ShiftNet::preprocess(const Var& x) const {
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != cfg_.in_channels) throw ShapeError("ShiftNet: inputs must be [N,C,H,W]");
  Var c = ndgrad::center_spatial(x);
  const std::size_t side = cfg_.input_side, H = s[2], W = s[3];
  if (H == side && W == side) return c;
  auto axis = [side](std::size_t n) {
    return n > side ? ndgrad::area_matrix(n, side)
                    : ndgrad::bicubic_matrix(n, side, static_cast<double>(side) / static_cast<double>(n));
  };
  return ndgrad::resample_separable(c, axis(H), axis(W));
}

Var ShiftNet::forward(const Var& reference, const Var& image, ndgrad::Mode mode, std::uint64_t seed) const {
  if (reference.shape() != image.shape()) throw ShapeError("ShiftNet: reference and image shapes differ");
  const Var parts[] = {preprocess(reference), preprocess(image)};
  Var x = ndgrad::concat(parts, 1);
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    x = ndgrad::relu(norms_[l](convs_[l](x), mode));
    if (pools_after(cfg_, l + 1)) x = ndgrad::maxpool2d(x, 2, 2);
  }
  const std::size_t n = x.shape()[0];
  x = ndgrad::reshape(x, {n, cfg_.flattened_size()});
  x = ndgrad::relu((*fc1_)(ndgrad::dropout(x, cfg_.dropout, mode, seed)));
  return (*fc2_)(x);
}

shiftlanczos::Shift ShiftNet::predict(const Tensor& reference, const Tensor& image) const {
  if (reference.rank() != 3) throw ShapeError("ShiftNet::predict: images must be [C,H,W]");
  ndgrad::NoGradGuard no_grad;
  auto batch = [](const Tensor& t) {
    ndgrad::Shape s{1};
    s.insert(s.end(), t.shape().begin(), t.shape().end());
    return ndgrad::constant(t.reshape(s));
  };
  const Tensor out = forward(batch(reference), batch(image), ndgrad::Mode::eval).value();
  return {out[0], out[1]};
}

std::vector<ParamRow> ShiftNet::parameter_table() const {
  std::vector<ParamRow> rows;
  std::size_t in = 2 * cfg_.in_channels;
  for (std::size_t l = 0; l < cfg_.channels.size(); ++l) {
    const std::string p = "layer" + std::to_string(l + 1);
    const std::string c = std::to_string(cfg_.channels[l]);
    rows.push_back({p, "Conv2d(in=" + std::to_string(in) + ", out=" + c + ", k3, s1, p1)", store_->count(p + ".conv.")});
    rows.push_back({p, "BatchNorm2d(" + c + ")", store_->count(p + ".bn.")});
    in = cfg_.channels[l];
  }
  rows.push_back({"fc1", "Linear(" + std::to_string(cfg_.flattened_size()) + ", " + std::to_string(cfg_.fc_width) + ")",
                  store_->count("fc1.")});
  rows.push_back({"fc2",
                  "Linear(" + std::to_string(cfg_.fc_width) + ", 2" + (cfg_.fc2_bias ? "" : ", bias=False") + ")",
                  store_->count("fc2.")});
  return rows;
}

}  // namespace mfsr::hrnet
