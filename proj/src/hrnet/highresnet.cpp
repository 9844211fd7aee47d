#include "mfsr/hrnet/highresnet.hpp"

#include <algorithm>
#include <numeric>

namespace mfsr::hrnet {

using ndgrad::ShapeError;

std::size_t total(const std::vector<ParamRow>& rows, const std::string& stage) {
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (stage.empty() || r.stage == stage) n += r.count;
  }
  return n;
}

ViewBatch make_view_batch(const std::vector<scenes::PaddedSet>& sets, const std::vector<Tensor>& references) {
  if (sets.empty()) throw std::invalid_argument("make_view_batch: no image sets");
  if (references.size() != sets.size()) throw std::invalid_argument("make_view_batch: one reference per set required");
  const std::size_t B = sets.size(), K = sets[0].views.size();
  if (K == 0) throw std::invalid_argument("make_view_batch: empty image set");
  const auto& vs = sets[0].views[0].shape();
  if (vs.size() != 3) throw ShapeError("make_view_batch: views must be [C,H,W]");
  const std::size_t per = ndgrad::numel(vs);
  ViewBatch batch;
  batch.sets = B;
  batch.views = Tensor({K * B, vs[0], vs[1], vs[2]}, sets[0].views[0].dtype());
  batch.reference = Tensor({B, vs[0], vs[1], vs[2]}, references[0].dtype());
  batch.alpha.resize(K * B);
  for (std::size_t b = 0; b < B; ++b) {
    if (sets[b].views.size() != K || sets[b].alpha.size() != K) {
      throw std::invalid_argument("make_view_batch: image sets differ in size");
    }
    if (references[b].shape() != vs) throw ShapeError("make_view_batch: reference shape differs from views");
    std::copy_n(references[b].data(), per, batch.reference.data() + b * per);
    for (std::size_t k = 0; k < K; ++k) {
      if (sets[b].views[k].shape() != vs) throw ShapeError("make_view_batch: views differ in shape");
      std::copy_n(sets[b].views[k].data(), per, batch.views.data() + (k * B + b) * per);
      batch.alpha[k * B + b] = sets[b].alpha[k];
    }
  }
  return batch;
}

HighResNet::HighResNet(const HighResNetConfig& cfg, Dtype dtype, std::uint64_t seed)
    : cfg_(cfg), store_(std::make_unique<ParameterStore>()) {
  if (cfg.in_channels == 0 || cfg.hidden == 0 || cfg.zoom == 0 || cfg.kernel == 0) {
    throw std::invalid_argument("HighResNetConfig: channels, zoom and kernel must be positive");
  }
  if (cfg.kernel % 2 == 0) throw std::invalid_argument("HighResNetConfig: kernel must be odd");
  std::mt19937_64 rng(seed);
  auto& s = *store_;
  const std::size_t C = cfg.in_channels, H = cfg.hidden, k = cfg.kernel, p = k / 2;
  enc_conv0_ = std::make_unique<Conv2d>(s, "encode.conv0", 2 * C, H, k, 1, p, dtype, rng);
  enc_act0_ = std::make_unique<PReLU>(s, "encode.act0", dtype);
  enc_res0_ = std::make_unique<ResidualBlock>(s, "encode.res0", H, k, dtype, rng);
  enc_res1_ = std::make_unique<ResidualBlock>(s, "encode.res1", H, k, dtype, rng);
  enc_conv1_ = std::make_unique<Conv2d>(s, "encode.conv1", H, H, k, 1, p, dtype, rng);
  fuse_res_ = std::make_unique<ResidualBlock>(s, "fuse.res", 2 * H, k, dtype, rng);
  fuse_conv_ = std::make_unique<Conv2d>(s, "fuse.conv", 2 * H, H, k, 1, p, dtype, rng);
  fuse_act_ = std::make_unique<PReLU>(s, "fuse.act", dtype);
  dec_deconv_ = std::make_unique<ConvTranspose2d>(s, "decode.deconv", H, H, k, cfg.zoom, dtype, rng);
  dec_act_ = std::make_unique<PReLU>(s, "decode.act", dtype);
  dec_conv_ = std::make_unique<Conv2d>(s, "decode.conv", H, C, 1, 1, 0, dtype, rng);
  dec_conv_->bias()->value.fill(0.0);
}

Var HighResNet::encode(const Var& views, const Var& references) const {
  if (views.shape() != references.shape()) {
    throw ShapeError("encode: view shape " + ndgrad::to_string(views.shape()) + " differs from reference " +
                     ndgrad::to_string(references.shape()));
  }
  if (views.shape().size() != 4 || views.shape()[1] != cfg_.in_channels) {
    throw ShapeError("encode: views must be [N," + std::to_string(cfg_.in_channels) + ",H,W], got " +
                     ndgrad::to_string(views.shape()));
  }
  const Var parts[] = {views, references};
  Var x = (*enc_act0_)((*enc_conv0_)(ndgrad::concat(parts, 1)));
  x = (*enc_res1_)((*enc_res0_)(x));
  return (*enc_conv1_)(x);
}

EncodedState HighResNet::fuse_pair(const EncodedState& si, const EncodedState& sj) const {
  if (si.state.shape() != sj.state.shape()) throw ShapeError("fuse_pair: state shapes differ");
  const std::size_t n = si.state.shape()[0];
  if (si.alpha.size() != n || sj.alpha.size() != n) throw std::invalid_argument("fuse_pair: one flag per row required");
  if (std::none_of(sj.alpha.begin(), sj.alpha.end(), [](std::uint8_t a) { return a != 0; })) return si;
  const Var parts[] = {si.state, sj.state};
  Var shared = (*fuse_res_)(ndgrad::concat(parts, 1));
  Var update = (*fuse_act_)((*fuse_conv_)(shared));
  return {ndgrad::gated_add(si.state, update, sj.alpha), si.alpha};
}

Var HighResNet::decode(const Var& state, const Var& references) const {
  const auto& s = state.shape();
  if (s.size() != 4 || s[1] != cfg_.hidden) throw ShapeError("decode: state must be [N,hidden,H,W]");
  Var x = (*dec_conv_)((*dec_act_)((*dec_deconv_)(state)));
  const std::size_t oh = s[2] * cfg_.zoom, ow = s[3] * cfg_.zoom;
  if (x.shape()[2] != oh || x.shape()[3] != ow) {
    x = ndgrad::crop2d(x, (x.shape()[2] - oh) / 2, (x.shape()[3] - ow) / 2, oh, ow);
  }
  if (cfg_.use_global_residual) {
    if (!references) throw std::invalid_argument("decode: global residual needs the references");
    x = ndgrad::add(x, ndgrad::upsample_bicubic(references, static_cast<double>(cfg_.zoom)));
  }
  return x;
}

Var HighResNet::forward(const ViewBatch& batch) const {
  const auto& vs = batch.views.shape();
  const std::size_t B = batch.sets;
  if (vs.size() != 4 || B == 0 || vs[0] % B != 0) throw ShapeError("forward: views must be [K*B,C,H,W]");
  const std::size_t K = vs[0] / B;
  if (K == 0 || (K & (K - 1)) != 0) throw std::invalid_argument("forward: view count must be a power of two");
  if (batch.alpha.size() != K * B) throw std::invalid_argument("forward: one flag per view required");
  if (batch.reference.shape() != ndgrad::Shape{B, vs[1], vs[2], vs[3]}) {
    throw ShapeError("forward: reference must be [B,C,H,W]");
  }

  Var refs = ndgrad::constant(batch.reference);
  std::vector<std::size_t> ref_rows(K * B);
  for (std::size_t i = 0; i < K * B; ++i) ref_rows[i] = i % B;
  EncodedState level{encode(ndgrad::constant(batch.views), ndgrad::take_rows(refs, ref_rows)), batch.alpha};

  for (std::size_t k = K; k > 1; k /= 2) {
    const std::size_t half = k / 2;
    std::vector<std::size_t> rows_i, rows_j;
    EncodedState si, sj;
    for (std::size_t i = 0; i < half; ++i) {
      for (std::size_t b = 0; b < B; ++b) {
        rows_i.push_back(i * B + b);
        rows_j.push_back((k - 1 - i) * B + b);
        si.alpha.push_back(level.alpha[i * B + b]);
        sj.alpha.push_back(level.alpha[(k - 1 - i) * B + b]);
      }
    }
    si.state = ndgrad::take_rows(level.state, rows_i);
    sj.state = ndgrad::take_rows(level.state, rows_j);
    level = fuse_pair(si, sj);
  }
  return decode(level.state, refs);
}

std::vector<ParamRow> HighResNet::parameter_table() const {
  const auto& s = *store_;
  const std::size_t C = cfg_.in_channels, H = cfg_.hidden, k = cfg_.kernel, p = k / 2;
  const std::string ks = "k" + std::to_string(k);
  auto conv = [&](std::size_t in, std::size_t out, std::size_t kk, std::size_t pad) {
    return "Conv2d(in=" + std::to_string(in) + ", out=" + std::to_string(out) + ", k" + std::to_string(kk) + ", s1" +
           (pad ? ", p" + std::to_string(pad) : std::string()) + ")";
  };
  std::vector<ParamRow> rows = {
      {"encode", conv(2 * C, H, k, p), s.count("encode.conv0.")},
      {"encode", "PReLU", s.count("encode.act0.")},
      {"encode", "ResidualBlock(" + std::to_string(H) + ")", s.count("encode.res0.")},
      {"encode", "ResidualBlock(" + std::to_string(H) + ")", s.count("encode.res1.")},
      {"encode", conv(H, H, k, p), s.count("encode.conv1.")},
      {"fuse", "ResidualBlock(" + std::to_string(2 * H) + ")", s.count("fuse.res.")},
      {"fuse", conv(2 * H, H, k, p), s.count("fuse.conv.")},
      {"fuse", "PReLU", s.count("fuse.act.")},
      {"decode",
       "ConvTranspose2d(in=" + std::to_string(H) + ", out=" + std::to_string(H) + ", " + ks + ", s" +
           std::to_string(cfg_.zoom) + ")",
       s.count("decode.deconv.")},
      {"decode", "PReLU", s.count("decode.act.")},
      {"decode", conv(H, C, 1, 0), s.count("decode.conv.")},
  };
  if (cfg_.use_global_residual) {
    rows.push_back({"residual", "Upsample(scale_factor=" + std::to_string(cfg_.zoom) + ", mode='bicubic')", 0});
  }
  return rows;
}

Tensor highresnet_forward(const HighResNet& net, const std::vector<Tensor>& views, scenes::ReferenceMode reference,
                          std::size_t target_k) {
  if (views.empty()) throw std::invalid_argument("highresnet_forward: empty view list");
  for (const auto& v : views) {
    if (v.shape() != views[0].shape()) throw ShapeError("highresnet_forward: views differ in shape");
  }
  const std::size_t K = target_k == 0 ? scenes::next_power_of_two(views.size()) : target_k;
  if ((K & (K - 1)) != 0) throw std::invalid_argument("highresnet_forward: target view count must be a power of two");
  ndgrad::NoGradGuard no_grad;
  const Tensor ref = scenes::reference_frame(views, reference);
  const ViewBatch batch = make_view_batch({scenes::pad_imageset(views, K)}, {ref});
  Tensor out = net.forward(batch).value();
  const auto& s = out.shape();
  return out.reshape({s[1], s[2], s[3]});
}

}  // namespace mfsr::hrnet
