#include "mfsr/trainer/gradcheck_e2e.hpp"

#include <random>

#include "mfsr/hrnet/shiftnet.hpp"

namespace mfsr::trainer {

ndgrad::GradCheckResult end_to_end_gradient_check(std::uint64_t seed, const ndgrad::GradCheckOptions& opts) {
  using ndgrad::Dtype;
  using ndgrad::Tensor;
  constexpr std::size_t side = 16, zoom = 3, batch = 2;
  hrnet::HighResNet net({1, 8, zoom, 3, false}, Dtype::f64, seed);
  hrnet::ShiftNetConfig scfg;
  scfg.input_side = side;
  scfg.channels = {4, 4, 4, 4, 8, 8, 8, 8};
  scfg.fc_width = 16;
  scfg.dropout = 0.0;
  hrnet::ShiftNet shiftnet(scfg, Dtype::f64, seed + 1);

  std::mt19937_64 rng(seed + 2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto image = [&](std::size_t n) {
    Tensor t({1, n, n});
    for (double& v : t.values()) v = unif(rng);
    return t;
  };
  std::vector<scenes::PaddedSet> sets;
  std::vector<Tensor> refs;
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<Tensor> views{image(side), image(side), image(side)};
    refs.push_back(scenes::reference_frame(views));
    sets.push_back(scenes::pad_imageset(views, 4));
  }
  const hrnet::ViewBatch vb = hrnet::make_view_batch(sets, refs);
  Tensor hr({batch, 1, side * zoom, side * zoom});
  for (double& v : hr.values()) v = unif(rng);
  Tensor mask = Tensor::full(hr.shape(), 1.0);
  for (std::size_t i = 0; i < mask.numel(); i += 7) mask[i] = 0.0;

  shiftlanczos::RegisteredLossOptions lopts;
  lopts.lambda = 1e-2;  // large enough for the norm term to register
  lopts.differentiable_kernel = true;
  auto loss = [&] {
    ndgrad::Var sr = net.forward(vb);
    auto predictor = [&](const ndgrad::Var& s, const Tensor& h) {
      // Scaled so that the shifts are sub-pixel and away from the clamp.
      return ndgrad::scale(shiftnet.forward(ndgrad::constant(h), s, ndgrad::Mode::train), 3.0);
    };
    return shiftlanczos::registered_loss(sr, hr, mask, predictor, lopts).total;
  };
  std::vector<ndgrad::Parameter*> params;
  for (const auto* store : {&net.params(), &shiftnet.params()}) {
    for (const auto& p : store->all()) {
      // Conv biases ahead of batch norm and the output bias (removed by the
      // brightness-bias correction) have an exactly zero gradient, for which
      // a relative error is meaningless.
      const bool invariant = (p->name.starts_with("layer") && p->name.ends_with(".conv.bias")) ||
                             p->name == "decode.conv.bias";
      if (p->trainable && !invariant) params.push_back(p.get());
    }
  }
  return ndgrad::check_parameter_gradients("highresnet+shiftnet+registered_loss", loss, params, opts);
}

}  // namespace mfsr::trainer
