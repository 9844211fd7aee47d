#pragma once

#include <cmath>
#include <random>

#include "mfsr/ndgrad/tensor.hpp"

namespace testing_helpers {

inline mfsr::ndgrad::Tensor random_tensor(mfsr::ndgrad::Shape shape, std::mt19937_64& rng, double lo = 0.0,
                                          double hi = 1.0) {
  std::uniform_real_distribution<double> unif(lo, hi);
  mfsr::ndgrad::Tensor t(std::move(shape));
  for (double& v : t.values()) v = unif(rng);
  return t;
}

// Same shape and bit-identical values.
inline bool same(const mfsr::ndgrad::Tensor& a, const mfsr::ndgrad::Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

// Smooth test image: a few low-frequency sinusoids on [1,h,w].
inline mfsr::ndgrad::Tensor smooth_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  mfsr::ndgrad::Tensor t({1, h, w});
  const double fx = 0.05 + 0.1 * unif(rng), fy = 0.05 + 0.1 * unif(rng), p = 6.28 * unif(rng);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      t[y * w + x] = 0.5 + 0.2 * std::sin(fx * x + p) * std::cos(fy * y) + 0.1 * std::sin(0.7 * fx * (x + y));
  return t;
}

}  // namespace testing_helpers
