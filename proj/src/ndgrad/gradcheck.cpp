#include "mfsr/ndgrad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mfsr::ndgrad {

namespace {

std::vector<std::size_t> pick_entries(std::size_t n, std::size_t max_entries, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (max_entries == 0 || max_entries >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(max_entries);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct ErrorAccumulator {
  double max_abs_diff = 0.0, max_analytic = 0.0, max_numeric = 0.0;

  void add(double analytic, double numeric) {
    max_abs_diff = std::max(max_abs_diff, std::abs(analytic - numeric));
    max_analytic = std::max(max_analytic, std::abs(analytic));
    max_numeric = std::max(max_numeric, std::abs(numeric));
  }
  double relative() const { return max_abs_diff / std::max({max_analytic, max_numeric, 1e-8}); }
};

}  // namespace

GradCheckResult check_gradients(const std::string& name,
                                const std::function<Var(const std::vector<Var>&)>& f,
                                std::vector<Tensor> inputs, const GradCheckOptions& opts) {
  std::vector<Var> leaves;
  for (const Tensor& t : inputs) leaves.push_back(variable(t));
  backward(f(leaves));

  auto eval = [&]() {
    NoGradGuard guard;
    std::vector<Var> consts;
    for (const Tensor& t : inputs) consts.push_back(constant(t));
    return f(consts).value().item();
  };

  GradCheckResult result{name};
  std::mt19937_64 rng(opts.seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    ErrorAccumulator acc;
    const Tensor& analytic = leaves[k].grad();
    for (std::size_t i : pick_entries(inputs[k].numel(), opts.max_entries, rng)) {
      const double orig = inputs[k][i];
      inputs[k][i] = orig + opts.step;
      const double up = eval();
      inputs[k][i] = orig - opts.step;
      const double down = eval();
      inputs[k][i] = orig;
      const double a = analytic.empty() ? 0.0 : analytic[i];
      acc.add(a, (up - down) / (2.0 * opts.step));
      ++result.entries_checked;
    }
    result.max_relative_error = std::max(result.max_relative_error, acc.relative());
  }
  result.passed = result.max_relative_error < opts.tolerance;
  return result;
}

GradCheckResult check_parameter_gradients(const std::string& name, const std::function<Var()>& loss,
                                          const std::vector<Parameter*>& params,
                                          const GradCheckOptions& opts) {
  const Gradients grads = backward(loss());
  auto eval = [&]() {
    NoGradGuard guard;
    return loss().value().item();
  };

  GradCheckResult result{name};
  std::mt19937_64 rng(opts.seed);
  for (Parameter* p : params) {
    ErrorAccumulator acc;
    auto it = grads.find(p);
    double scale = 1e-8;
    if (it != grads.end()) {
      for (double g : it->second.values()) scale = std::max(scale, std::abs(g));
    }
    for (std::size_t i : pick_entries(p->value.numel(), opts.max_entries, rng)) {
      const double orig = p->value[i];
      auto numeric = [&](double h) {
        p->value[i] = orig + h;
        const double up = eval();
        p->value[i] = orig - h;
        const double down = eval();
        p->value[i] = orig;
        return (up - down) / (2.0 * h);
      };
      const double a = it == grads.end() ? 0.0 : it->second[i];
      double n = numeric(opts.step), h = opts.step;
      for (std::size_t r = 0; r < opts.refinements && std::abs(a - n) > opts.tolerance * scale; ++r) {
        h /= 10.0;
        const double finer = numeric(h);
        if (std::abs(a - finer) < std::abs(a - n)) n = finer;
      }
      acc.add(a, n);
      ++result.entries_checked;
    }
    result.max_relative_error = std::max(result.max_relative_error, acc.relative());
  }
  result.passed = result.max_relative_error < opts.tolerance;
  return result;
}

}  // namespace mfsr::ndgrad
