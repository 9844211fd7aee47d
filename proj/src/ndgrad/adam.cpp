#include "mfsr/ndgrad/adam.hpp"

#include <cmath>

namespace mfsr::ndgrad {

void adam_step(std::span<Parameter* const> params, const Gradients& grads, AdamState& state) {
  const AdamConfig& cfg = state.config;
  for (Parameter* p : params) {
    auto it = grads.find(p);
    if (it != grads.end() && it->second.shape() != p->value.shape()) {
      throw ShapeError("adam_step: gradient shape " + to_string(it->second.shape()) +
                       " does not match parameter '" + p->name + "' " + to_string(p->value.shape()));
    }
  }
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    auto it = grads.find(p);
    Tensor& m = state.first_moment[p];
    Tensor& v = state.second_moment[p];
    if (m.empty()) {
      m = Tensor(p->value.shape());
      v = Tensor(p->value.shape());
    }
    auto w = p->value.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = it != grads.end() ? it->second[i] : 0.0;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / bias1;
      const double vhat = v[i] / bias2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    p->value.round_to_dtype();
    require_finite(p->value, "adam_step");
  }
}

void adam_step(ParameterStore& store, const Gradients& grads, AdamState& state) {
  std::vector<Parameter*> params;
  for (const auto& p : store.all()) {
    if (p->trainable) params.push_back(p.get());
  }
  adam_step(params, grads, state);
}

}  // namespace mfsr::ndgrad
