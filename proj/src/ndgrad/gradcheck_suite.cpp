#include <random>

#include "mfsr/ndgrad/gradcheck.hpp"
#include "mfsr/ndgrad/ops.hpp"

namespace mfsr::ndgrad {

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> unif(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = unif(rng);
  return t;
}

// sum(out * R) for a fixed random R shaped like out.
Var contract(const Var& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(out, constant(random_tensor(out.shape(), rng))));
}

}  // namespace

std::vector<GradCheckResult> op_gradient_suite(std::uint64_t seed, const GradCheckOptions& opts) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> results;
  auto check = [&](const std::string& name, std::vector<Tensor> inputs,
                   const std::function<Var(const std::vector<Var>&)>& op) {
    const std::uint64_t contract_seed = rng();
    results.push_back(check_gradients(
        name, [&](const std::vector<Var>& v) { return contract(op(v), contract_seed); }, std::move(inputs),
        opts));
  };

  check("add", {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)},
        [](const auto& v) { return add(v[0], v[1]); });
  check("sub", {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)},
        [](const auto& v) { return sub(v[0], v[1]); });
  check("mul", {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)},
        [](const auto& v) { return mul(v[0], v[1]); });
  check("scale+add_scalar", {random_tensor({4}, rng)},
        [](const auto& v) { return add_scalar(scale(v[0], -1.7), 0.3); });
  check("square+mean", {random_tensor({5}, rng)}, [](const auto& v) { return reshape(mean(square(v[0])), {1}); });
  check("clamp", {random_tensor({6}, rng, -2.0, 2.0)}, [](const auto& v) { return clamp(v[0], -1.0, 1.0); });
  check("row_norms", {random_tensor({3, 2}, rng)}, [](const auto& v) { return row_norms(v[0]); });
  check("concat", {random_tensor({2, 1, 3, 3}, rng), random_tensor({2, 2, 3, 3}, rng)}, [](const auto& v) {
    std::vector<Var> parts{v[0], v[1]};
    return concat(parts, 1);
  });
  check("take_rows", {random_tensor({4, 2, 2}, rng)}, [](const auto& v) {
    const std::vector<std::size_t> rows{3, 1, 1};
    return take_rows(v[0], rows);
  });
  check("gated_add", {random_tensor({3, 2}, rng), random_tensor({3, 2}, rng)}, [](const auto& v) {
    const std::vector<std::uint8_t> gates{1, 0, 1};
    return gated_add(v[0], v[1], gates);
  });
  check("crop2d", {random_tensor({1, 2, 5, 6}, rng)}, [](const auto& v) { return crop2d(v[0], 1, 2, 3, 3); });
  check("center_spatial", {random_tensor({2, 1, 3, 4}, rng)}, [](const auto& v) { return center_spatial(v[0]); });
  check("conv2d s1p1", {random_tensor({2, 3, 5, 5}, rng), random_tensor({4, 3, 3, 3}, rng), random_tensor({4}, rng)},
        [](const auto& v) { return conv2d(v[0], v[1], v[2], 1, 1); });
  check("conv2d s2p0 nobias", {random_tensor({1, 2, 7, 6}, rng), random_tensor({3, 2, 3, 3}, rng)},
        [](const auto& v) { return conv2d(v[0], v[1], Var{}, 2, 0); });
  check("conv_transpose2d s3", {random_tensor({2, 3, 3, 4}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({2}, rng)},
        [](const auto& v) { return conv_transpose2d(v[0], v[1], v[2], 3); });
  check("conv_transpose2d s1", {random_tensor({1, 2, 4, 4}, rng), random_tensor({2, 3, 3, 3}, rng), random_tensor({3}, rng)},
        [](const auto& v) { return conv_transpose2d(v[0], v[1], v[2], 1); });
  check("prelu", {random_tensor({2, 2, 3, 3}, rng), Tensor({1}, {0.25})},
        [](const auto& v) { return prelu(v[0], v[1]); });
  check("relu", {random_tensor({10}, rng)}, [](const auto& v) { return relu(v[0]); });
  check("maxpool2d", {random_tensor({2, 2, 4, 5}, rng)}, [](const auto& v) { return maxpool2d(v[0], 2, 2); });
  check("batchnorm2d train", {random_tensor({3, 2, 3, 3}, rng), random_tensor({2}, rng, 0.5, 1.5), random_tensor({2}, rng)},
        [](const auto& v) {
          BatchNormState st{Tensor({2}), Tensor::full({2}, 1.0)};
          return batchnorm2d(v[0], v[1], v[2], st, Mode::train);
        });
  check("batchnorm2d eval", {random_tensor({2, 2, 3, 3}, rng), random_tensor({2}, rng, 0.5, 1.5), random_tensor({2}, rng)},
        [](const auto& v) {
          BatchNormState st{Tensor({2}, {0.1, -0.2}), Tensor({2}, {0.8, 1.3})};
          return batchnorm2d(v[0], v[1], v[2], st, Mode::eval);
        });
  check("linear", {random_tensor({3, 4}, rng), random_tensor({2, 4}, rng), random_tensor({2}, rng)},
        [](const auto& v) { return linear(v[0], v[1], v[2]); });
  check("linear nobias", {random_tensor({3, 4}, rng), random_tensor({2, 4}, rng)},
        [](const auto& v) { return linear(v[0], v[1], Var{}); });
  check("dropout train", {random_tensor({20}, rng)}, [](const auto& v) { return dropout(v[0], 0.5, Mode::train, 99); });
  check("upsample_bicubic", {random_tensor({1, 2, 4, 3}, rng)}, [](const auto& v) { return upsample_bicubic(v[0], 3.0); });
  check("resize_area", {random_tensor({1, 1, 6, 9}, rng)}, [](const auto& v) { return resize_area(v[0], 4, 3); });
  return results;
}

}  // namespace mfsr::ndgrad
