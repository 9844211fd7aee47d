#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "mfsr/hrnet/highresnet.hpp"
#include "mfsr/hrnet/shiftnet.hpp"
#include "mfsr/kelvin/metrics.hpp"
#include "mfsr/ndgrad/gradcheck.hpp"

using namespace mfsr;
using hrnet::Tensor;
using testing_helpers::random_tensor;
using testing_helpers::same;

namespace {

std::vector<Tensor> random_views(std::size_t k, std::size_t side, std::mt19937_64& rng) {
  std::vector<Tensor> v;
  for (std::size_t i = 0; i < k; ++i) v.push_back(random_tensor({1, side, side}, rng));
  return v;
}

hrnet::ViewBatch single_set(const std::vector<Tensor>& views, std::size_t target) {
  return hrnet::make_view_batch({scenes::pad_imageset(views, target)}, {scenes::reference_frame(views)});
}

}  // namespace

TEST(ParameterCounts, ResidualBlocks) {
  std::mt19937_64 rng(0);
  ndgrad::ParameterStore s64, s128;
  hrnet::ResidualBlock b64(s64, "r", 64, 3, ndgrad::Dtype::f32, rng);
  hrnet::ResidualBlock b128(s128, "r", 128, 3, ndgrad::Dtype::f32, rng);
  EXPECT_EQ(s64.count(), 73'858u);
  EXPECT_EQ(s128.count(), 295'170u);
  EXPECT_EQ(s64.count(), 2 * (9 * 64 * 64 + 64) + 2u);
}

TEST(ParameterCounts, HighResNetRowByRow) {
  const hrnet::HighResNet net;
  const auto rows = net.parameter_table();
  const std::vector<std::pair<std::string, std::size_t>> expected{
      {"Conv2d(in=2, out=64, k3, s1, p1)", 1'216},  {"PReLU", 1},
      {"ResidualBlock(64)", 73'858},                {"ResidualBlock(64)", 73'858},
      {"Conv2d(in=64, out=64, k3, s1, p1)", 36'928}, {"ResidualBlock(128)", 295'170},
      {"Conv2d(in=128, out=64, k3, s1, p1)", 73'792}, {"PReLU", 1},
      {"ConvTranspose2d(in=64, out=64, k3, s3)", 36'928}, {"PReLU", 1},
      {"Conv2d(in=64, out=1, k1, s1)", 65}};
  ASSERT_EQ(rows.size(), expected.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].layer, expected[i].first);
    EXPECT_EQ(rows[i].count, expected[i].second) << rows[i].layer;
  }
  EXPECT_EQ(hrnet::total(rows, "encode"), 185'861u);
  EXPECT_EQ(hrnet::total(rows, "fuse"), 368'963u);
  EXPECT_EQ(hrnet::total(rows, "decode"), 36'994u);
  EXPECT_EQ(hrnet::total(rows), 591'818u);
  EXPECT_EQ(net.params().count(), 591'818u);
}

TEST(ParameterCounts, ShiftNet) {
  const hrnet::ShiftNetConfig cfg;
  EXPECT_EQ(cfg.flattened_size(), 32'768u);
  const hrnet::ShiftNet net(cfg);
  const auto rows = net.parameter_table();
  EXPECT_EQ(hrnet::total(rows), 34'187'648u);
  EXPECT_EQ(net.params().count(), 34'187'648u);
  const std::size_t fc1_weight = net.params().get("fc1.weight").value.numel();
  EXPECT_EQ(fc1_weight, 33'554'432u);
  EXPECT_GE(static_cast<double>(fc1_weight) / 34'187'648.0, 0.98);
}

TEST(ResidualBlock, ZeroWeightsGiveIdentity) {
  std::mt19937_64 rng(1);
  ndgrad::ParameterStore store;
  hrnet::ResidualBlock block(store, "r", 4, 3, ndgrad::Dtype::f64, rng);
  for (const auto& p : store.all()) {
    if (!p->name.ends_with("slope")) p->value = Tensor(p->value.shape());
  }
  const Tensor x = random_tensor({2, 4, 5, 5}, rng, -1, 1);
  EXPECT_TRUE(same(block(ndgrad::constant(x)).value(), x));
}

TEST(HighResNet, EncodeShapeAndDeterminism) {
  std::mt19937_64 rng(2);
  const hrnet::HighResNet net({}, ndgrad::Dtype::f32, 3);
  const Tensor v = random_tensor({1, 1, 64, 64}, rng), r = random_tensor({1, 1, 64, 64}, rng);
  ndgrad::NoGradGuard guard;
  const Tensor a = net.encode(ndgrad::constant(v), ndgrad::constant(r)).value();
  const Tensor b = net.encode(ndgrad::constant(v), ndgrad::constant(r)).value();
  EXPECT_EQ(a.shape(), (ndgrad::Shape{1, 64, 64, 64}));
  EXPECT_TRUE(same(a, b));
  EXPECT_ANY_THROW(net.encode(ndgrad::constant(v), ndgrad::constant(random_tensor({1, 1, 32, 64}, rng))));
}

TEST(HighResNet, FusePairGateIgnoresGarbage) {
  std::mt19937_64 rng(3);
  const hrnet::HighResNet net({1, 8, 3, 3, false}, ndgrad::Dtype::f64, 4);
  const Tensor si = random_tensor({2, 8, 6, 6}, rng, -1, 1);
  const hrnet::EncodedState a{ndgrad::constant(si), {1, 1}};
  const hrnet::EncodedState garbage{ndgrad::constant(random_tensor({2, 8, 6, 6}, rng, -1e3, 1e3)), {0, 0}};
  const auto out = net.fuse_pair(a, garbage);
  EXPECT_TRUE(same(out.state.value(), si));
  EXPECT_EQ(out.alpha, a.alpha);
  // Mixed rows: only the gated row is untouched.
  const hrnet::EncodedState mixed{garbage.state, {1, 0}};
  const Tensor m = net.fuse_pair(a, mixed).state.value();
  bool row0_same = true, row1_same = true;
  for (std::size_t i = 0; i < 288; ++i) {
    row0_same = row0_same && m[i] == si[i];
    row1_same = row1_same && m[288 + i] == si[288 + i];
  }
  EXPECT_FALSE(row0_same);
  EXPECT_TRUE(row1_same);
}

TEST(HighResNet, DecodeUpscalesAndGlobalResidual) {
  std::mt19937_64 rng(4);
  hrnet::HighResNet net({1, 8, 3, 3, true}, ndgrad::Dtype::f64, 5);
  for (const auto& p : net.params().all()) {
    if (p->name.starts_with("decode.") && !p->name.ends_with("slope")) p->value = Tensor(p->value.shape());
  }
  const Tensor state = random_tensor({1, 8, 7, 7}, rng), ref = random_tensor({1, 1, 7, 7}, rng);
  const Tensor out = net.decode(ndgrad::constant(state), ndgrad::constant(ref)).value();
  EXPECT_EQ(out.shape(), (ndgrad::Shape{1, 1, 21, 21}));
  const Tensor bic = ndgrad::upsample_bicubic(ndgrad::constant(ref), 3.0).value();
  for (std::size_t i = 0; i < out.numel(); ++i) EXPECT_NEAR(out[i], bic[i], 1e-12);
}

TEST(HighResNet, DummyViewsAreBitExactlyGated) {
  const hrnet::HighResNet net({1, 8, 3, 3, false}, ndgrad::Dtype::f32, 6);
  std::mt19937_64 rng(7);
  for (std::size_t k : {3u, 5u, 9u}) {
    const auto views = random_views(k, 10, rng);
    const std::size_t target = scenes::next_power_of_two(k);
    auto set = scenes::pad_imageset(views, target);
    const Tensor ref = scenes::reference_frame(views);
    ndgrad::NoGradGuard guard;
    const Tensor clean = net.forward(hrnet::make_view_batch({set}, {ref})).value();
    for (std::size_t i = k; i < target; ++i) set.views[i] = random_tensor({1, 10, 10}, rng, -5, 5);
    const Tensor noisy = net.forward(hrnet::make_view_batch({set}, {ref})).value();
    EXPECT_TRUE(same(clean, noisy)) << "K'=" << k;
  }
}

TEST(HighResNet, ExtraPaddingLevelsAreExact) {
  const hrnet::HighResNet net({1, 8, 3, 3, false}, ndgrad::Dtype::f32, 8);
  std::mt19937_64 rng(9);
  const auto views = random_views(9, 8, rng);
  const Tensor a = hrnet::highresnet_forward(net, views, scenes::ReferenceMode::median, 16);
  const Tensor b = hrnet::highresnet_forward(net, views, scenes::ReferenceMode::median, 32);
  EXPECT_TRUE(same(a, b));
}

TEST(HighResNet, EveryArityWithSharedStorage) {
  const hrnet::HighResNet net({1, 4, 3, 3, false}, ndgrad::Dtype::f32, 10);
  const std::size_t before = net.params().count();
  std::mt19937_64 rng(11);
  for (std::size_t k = 1; k <= 32; ++k) {
    const Tensor out = hrnet::highresnet_forward(net, random_views(k, 6, rng));
    EXPECT_EQ(out.shape(), (ndgrad::Shape{1, 18, 18}));
  }
  EXPECT_EQ(net.params().count(), before);
  EXPECT_ANY_THROW(hrnet::highresnet_forward(net, {}));
  auto mixed = random_views(2, 6, rng);
  mixed.push_back(random_tensor({1, 7, 6}, rng));
  EXPECT_ANY_THROW(hrnet::highresnet_forward(net, mixed));
}

TEST(HighResNet, SingleViewSkipsFusion) {
  const hrnet::HighResNet net({1, 4, 3, 3, false}, ndgrad::Dtype::f64, 12);
  std::mt19937_64 rng(13);
  const auto views = random_views(1, 6, rng);
  const Tensor out = hrnet::highresnet_forward(net, views);
  const Tensor v = views[0].reshape({1, 1, 6, 6});
  ndgrad::NoGradGuard guard;
  const Tensor direct = net.decode(net.encode(ndgrad::constant(v), ndgrad::constant(v)), {}).value();
  EXPECT_TRUE(same(out, direct.reshape({1, 18, 18})));
}

TEST(HighResNet, GradientCheckOnTinyConfig) {
  hrnet::HighResNet net({1, 8, 3, 3, false}, ndgrad::Dtype::f64, 14);
  std::mt19937_64 rng(15);
  const auto batch = single_set(random_views(4, 16, rng), 4);
  const Tensor hr = random_tensor({1, 1, 48, 48}, rng), mask = Tensor::full({1, 1, 48, 48}, 1.0);
  std::vector<ndgrad::Parameter*> params;
  for (const auto& p : net.params().all()) {
    if (p->name != "decode.conv.bias") params.push_back(p.get());
  }
  const auto r = ndgrad::check_parameter_gradients(
      "highresnet", [&] { return kelvin::clear_mse_loss(net.forward(batch), hr, mask); }, params,
      {1e-6, 1e-4, 6, 7, 2});
  EXPECT_TRUE(r.passed) << r.max_relative_error;
}

TEST(ShiftNet, EvalIsDeterministicAndResizesInputs) {
  hrnet::ShiftNetConfig cfg;
  cfg.input_side = 16;
  cfg.channels = {4, 4, 4, 4, 8, 8, 8, 8};
  cfg.fc_width = 16;
  const hrnet::ShiftNet net(cfg, ndgrad::Dtype::f64, 16);
  std::mt19937_64 rng(17);
  const Tensor a = random_tensor({1, 48, 48}, rng), b = random_tensor({1, 48, 48}, rng);
  const auto s1 = net.predict(a, b), s2 = net.predict(a, b);
  EXPECT_EQ(s1.dx, s2.dx);
  EXPECT_EQ(s1.dy, s2.dy);
  const auto small = net.predict(random_tensor({1, 10, 10}, rng), random_tensor({1, 10, 10}, rng));
  EXPECT_TRUE(std::isfinite(small.dx) && std::isfinite(small.dy));
  EXPECT_ANY_THROW(net.predict(a, random_tensor({1, 47, 48}, rng)));
}

TEST(ShiftNet, ConfigValidation) {
  hrnet::ShiftNetConfig cfg;
  cfg.input_side = 4;
  EXPECT_ANY_THROW(cfg.validate());
  cfg.input_side = 128;
  cfg.dropout = 1.0;
  EXPECT_ANY_THROW(cfg.validate());
}
