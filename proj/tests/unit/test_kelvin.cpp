#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "mfsr/kelvin/metrics.hpp"
#include "mfsr/ndgrad/gradcheck.hpp"

using namespace mfsr;
using kelvin::Tensor;
using testing_helpers::random_tensor;

namespace {

// Brute-force scorer written from the metric definition with plain loops.
double oracle_cpsnr_window(const Tensor& hr, const Tensor& sr, const Tensor& mask, std::size_t H, std::size_t W,
                           std::size_t crop, std::size_t u, std::size_t v, std::size_t side) {
  double bias_sum = 0, count = 0;
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      const std::size_t hi = (y + u) * W + (x + v), si = (y + crop) * W + (x + crop);
      if (mask[hi] > 0.5) {
        bias_sum += hr[hi] - sr[si];
        count += 1;
      }
    }
  const double b = bias_sum / count;
  double se = 0;
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      const std::size_t hi = (y + u) * W + (x + v), si = (y + crop) * W + (x + crop);
      if (mask[hi] > 0.5) se += (hr[hi] - sr[si] - b) * (hr[hi] - sr[si] - b);
    }
  (void)H;
  const double mse = se / count;
  return -10.0 * std::log10(mse < 1e-10 ? 1e-10 : mse);
}

double oracle_registered(const Tensor& hr, const Tensor& sr, const Tensor& mask, std::size_t d) {
  const std::size_t H = hr.dim(1), W = hr.dim(2), side = H - 2 * d;
  double best = -1e300;
  for (std::size_t u = 0; u <= 2 * d; ++u)
    for (std::size_t v = 0; v <= 2 * d; ++v) best = std::max(best, oracle_cpsnr_window(hr, sr, mask, H, W, d, u, v, side));
  return best;
}

Tensor random_mask(ndgrad::Shape shape, std::mt19937_64& rng, double clear = 0.8) {
  std::bernoulli_distribution b(clear);
  Tensor m(std::move(shape));
  for (double& v : m.values()) v = b(rng) ? 1.0 : 0.0;
  m[0] = 1.0;
  return m;
}

Tensor roll_rows(const Tensor& img, std::size_t k) {
  const std::size_t H = img.dim(1), W = img.dim(2);
  Tensor out(img.shape());
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) out[((y + k) % H) * W + x] = img[y * W + x];
  return out;
}

}  // namespace

TEST(BrightnessBias, Examples) {
  const Tensor hr({1, 1, 2}, {0, 1}), zero({1, 1, 2}, {0, 0}), full = Tensor::full({1, 1, 2}, 1.0);
  EXPECT_DOUBLE_EQ(kelvin::brightness_bias(hr, zero, full), 0.5);
  EXPECT_DOUBLE_EQ(kelvin::brightness_bias(hr, hr, full), 0.0);
  Tensor up = hr;
  for (double& v : up.values()) v += 0.1;
  EXPECT_NEAR(kelvin::brightness_bias(hr, up, full), -0.1, 1e-15);
}

TEST(BrightnessBias, EmptyClearSetThrows) {
  const Tensor hr({1, 1, 2}, {0, 1});
  EXPECT_ANY_THROW(kelvin::brightness_bias(hr, hr, Tensor({1, 1, 2})));
  EXPECT_ANY_THROW(kelvin::cpsnr(hr, hr, Tensor({1, 1, 2})));
}

TEST(Cpsnr, HandExample) {
  const Tensor hr({1, 1, 2}, {0, 1}), sr({1, 1, 2}, {0, 0}), full = Tensor::full({1, 1, 2}, 1.0);
  EXPECT_NEAR(kelvin::clear_mse(hr, sr, full), 0.25, 1e-15);
  EXPECT_NEAR(kelvin::cpsnr(hr, sr, full), 6.0206, 1e-4);
}

TEST(Cpsnr, CappedAndInvariantToConstantOffset) {
  std::mt19937_64 rng(1);
  const Tensor hr = random_tensor({1, 16, 16}, rng), mask = random_mask({1, 16, 16}, rng);
  EXPECT_DOUBLE_EQ(kelvin::cpsnr(hr, hr, mask), 100.0);
  Tensor shifted = hr;
  for (double& v : shifted.values()) v += 0.37;
  EXPECT_NEAR(kelvin::cpsnr(hr, shifted, mask), 100.0, 1e-9);
  const Tensor sr = random_tensor({1, 16, 16}, rng);
  Tensor sr_off = sr;
  for (double& v : sr_off.values()) v -= 0.2;
  EXPECT_NEAR(kelvin::cpsnr(hr, sr, mask), kelvin::cpsnr(hr, sr_off, mask), 1e-9);
}

TEST(Cpsnr, MaskedPixelsNeverMatter) {
  std::mt19937_64 rng(2);
  const Tensor hr = random_tensor({1, 20, 20}, rng), sr = random_tensor({1, 20, 20}, rng);
  const Tensor mask = random_mask({1, 20, 20}, rng, 0.6);
  Tensor hr2 = hr, sr2 = sr;
  for (std::size_t i = 0; i < mask.numel(); ++i) {
    if (mask[i] == 0.0) {
      hr2[i] = 5.0;
      sr2[i] = -3.0;
    }
  }
  EXPECT_EQ(kelvin::cpsnr(hr, sr, mask), kelvin::cpsnr(hr2, sr2, mask));
  EXPECT_EQ(kelvin::brightness_bias(hr, sr, mask), kelvin::brightness_bias(hr2, sr2, mask));
}

TEST(RegisteredCpsnr, MatchesBruteForceOracle) {
  std::mt19937_64 rng(3);
  for (int c = 0; c < 50; ++c) {
    const Tensor hr = random_tensor({1, 32, 32}, rng), mask = random_mask({1, 32, 32}, rng);
    Tensor sr = random_tensor({1, 32, 32}, rng);
    // Half the cases are noisy copies so the scores span a useful range.
    if (c % 2) {
      for (std::size_t i = 0; i < sr.numel(); ++i) sr[i] = hr[i] + 0.05 * (sr[i] - 0.5);
    }
    const double got = kelvin::registered_cpsnr(hr, sr, mask, 3);
    EXPECT_NEAR(got, oracle_registered(hr, sr, mask, 3), 1e-9) << "case " << c;
    const Tensor hr_c = kelvin::crop_spatial(hr, 3, 3, 26, 26), sr_c = kelvin::crop_spatial(sr, 3, 3, 26, 26);
    EXPECT_GE(got, kelvin::cpsnr(hr_c, sr_c, kelvin::crop_spatial(mask, 3, 3, 26, 26)));
    EXPECT_NEAR(kelvin::cpsnr(hr, sr, mask), oracle_cpsnr_window(hr, sr, mask, 32, 32, 0, 0, 0, 32), 1e-9);
  }
}

TEST(RegisteredCpsnr, IdentityAndRolledCopy) {
  std::mt19937_64 rng(4);
  const Tensor hr = random_tensor({1, 24, 24}, rng), mask = Tensor::full({1, 24, 24}, 1.0);
  EXPECT_DOUBLE_EQ(kelvin::registered_cpsnr(hr, hr, mask, 3), 100.0);
  EXPECT_DOUBLE_EQ(kelvin::registered_cpsnr(hr, roll_rows(hr, 2), mask, 3), 100.0);
  EXPECT_LT(kelvin::cpsnr(hr, roll_rows(hr, 2), mask), 100.0);
}

TEST(RegisteredCpsnr, TooSmallThrows) {
  const Tensor img = Tensor::full({1, 6, 6}, 0.5);
  EXPECT_ANY_THROW(kelvin::registered_cpsnr(img, img, img, 3));
}

TEST(LeaderboardScore, Examples) {
  const std::map<std::string, double> base{{"a", 40.0}, {"b", 30.0}};
  EXPECT_DOUBLE_EQ(kelvin::leaderboard_score(base, base), 1.0);
  EXPECT_DOUBLE_EQ(kelvin::leaderboard_score({{"a", 80.0}, {"b", 60.0}}, base), 0.5);
  EXPECT_ANY_THROW(kelvin::leaderboard_score({{"a", 40.0}}, base));
  EXPECT_ANY_THROW(kelvin::leaderboard_score({{"a", 40.0}, {"c", 30.0}}, base));
}

TEST(ScoreReport, BelowOneIffModelBeatsBaseline) {
  const auto r = kelvin::make_report({{"a", 41.0}, {"b", 29.0}}, {{"a", 40.0}, {"b", 30.0}});
  ASSERT_EQ(r.scenes.size(), 2u);
  EXPECT_LT(r.scenes[0].normalized_score, 1.0);
  EXPECT_GT(r.scenes[1].normalized_score, 1.0);
  EXPECT_DOUBLE_EQ(r.mean_cpsnr(), 35.0);
  EXPECT_DOUBLE_EQ(r.mean_baseline_cpsnr(), 35.0);
  std::ostringstream os;
  kelvin::write_csv(r, os);
  const std::string csv = os.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "scene_id,cpsnr_db,baseline_cpsnr_db,normalized_score");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Losses, ClearMseLossMatchesMetricAndGradients) {
  std::mt19937_64 rng(5);
  const Tensor hr = random_tensor({2, 1, 6, 6}, rng), mask = random_mask({2, 1, 6, 6}, rng);
  const Tensor sr = random_tensor({2, 1, 6, 6}, rng);
  const double loss = kelvin::clear_mse_loss(ndgrad::constant(sr), hr, mask).value().item();
  auto sample = [](const Tensor& t, std::size_t n) {
    return Tensor({1, 6, 6}, std::vector<double>(t.values().begin() + n * 36, t.values().begin() + (n + 1) * 36));
  };
  double expect = 0;
  for (std::size_t n = 0; n < 2; ++n) expect += kelvin::clear_mse(sample(hr, n), sample(sr, n), sample(mask, n)) / 2.0;
  EXPECT_NEAR(loss, expect, 1e-12);
  for (auto* fn : {&kelvin::clear_mse_loss, &kelvin::masked_mse_loss}) {
    const auto r = ndgrad::check_gradients("loss", [&](const std::vector<ndgrad::Var>& in) { return fn(in[0], hr, mask); },
                                           {sr});
    EXPECT_TRUE(r.passed) << r.max_relative_error;
  }
}

TEST(Losses, SampleWithoutClearPixelsContributesZero) {
  std::mt19937_64 rng(6);
  const Tensor hr = random_tensor({2, 1, 4, 4}, rng), sr = random_tensor({2, 1, 4, 4}, rng);
  Tensor mask = Tensor::full({2, 1, 4, 4}, 1.0);
  for (std::size_t i = 16; i < 32; ++i) mask[i] = 0.0;
  Tensor sr2 = sr;
  for (std::size_t i = 16; i < 32; ++i) sr2[i] = 9.0;
  EXPECT_EQ(kelvin::clear_mse_loss(ndgrad::constant(sr), hr, mask).value().item(),
            kelvin::clear_mse_loss(ndgrad::constant(sr2), hr, mask).value().item());
}
