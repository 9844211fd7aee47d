#include "mfsr/ndgrad/autograd.hpp"

#include <algorithm>
#include <unordered_set>

namespace mfsr::ndgrad {

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;
  std::vector<Var> inputs;
  BackwardFn backward_fn;
  Parameter* param = nullptr;
  const char* op = "leaf";
  bool requires_grad = false;
  bool swept = false;
};

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

const Tensor& empty_tensor() {
  static const Tensor t;
  return t;
}

void accumulate(Tensor& dst, const Tensor& src) {
  if (dst.empty()) {
    dst = src;
    return;
  }
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

Parameter& ParameterStore::add(std::string name, Tensor init, bool trainable) {
  if (contains(name)) {
    throw std::invalid_argument("duplicate parameter name '" + name + "'");
  }
  params_.push_back(std::make_unique<Parameter>(Parameter{std::move(name), std::move(init), trainable}));
  return *params_.back();
}

Parameter& ParameterStore::get(std::string_view name) {
  for (auto& p : params_) {
    if (p->name == name) return *p;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

const Parameter& ParameterStore::get(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->get(name);
}

bool ParameterStore::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p->name == name; });
}

std::size_t ParameterStore::count(std::string_view prefix) const {
  std::size_t total = 0;
  for (const auto& p : params_) {
    if (p->trainable && p->name.starts_with(prefix)) total += p->value.numel();
  }
  return total;
}

const Tensor& Var::value() const {
  if (!node_) throw std::logic_error("value() on an empty Var");
  return node_->value;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

const Tensor& Var::grad() const { return node_ ? node_->grad : empty_tensor(); }

Var constant(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var variable(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var leaf(Parameter& param) {
  auto node = std::make_shared<detail::Node>();
  node->value = param.value;
  node->param = &param;
  node->requires_grad = param.trainable && g_grad_enabled;
  return Var(std::move(node));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool GradSink::wants(std::size_t i) const { return inputs_[i].requires_grad(); }

Tensor& GradSink::at(std::size_t i) {
  auto& node = *inputs_[i].node();
  if (node.grad.empty()) {
    node.grad = Tensor(node.value.shape(), Dtype::f64);
  }
  return node.grad;
}

Var record(Tensor value, std::vector<Var> inputs, const char* op, BackwardFn backward_fn) {
  value.round_to_dtype();
  require_finite(value, op);
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->op = op;
  if (g_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); })) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(node));
}

Gradients backward(const Var& loss) {
  if (!loss) throw std::logic_error("backward() on an empty Var");
  auto& root = *loss.node();
  if (root.value.numel() != 1) {
    throw ShapeError("backward() needs a one-element loss, got shape " + to_string(root.value.shape()));
  }
  if (root.swept) throw std::logic_error("backward() called twice on the same graph");
  root.swept = true;

  // Iterative post-order DFS gives a topological order (inputs before users).
  // Owning handles keep nodes alive while interior inputs are released.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  if (root.requires_grad) stack.emplace_back(loss.node(), 0);
  visited.insert(&root);
  while (!stack.empty()) {
    auto node = stack.back().first;
    const std::size_t next = stack.back().second;
    if (next < node->inputs.size()) {
      ++stack.back().second;
      const auto& child = node->inputs[next].node();
      if (child->requires_grad && visited.insert(child.get()).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(std::move(node));
      stack.pop_back();
    }
  }

  Gradients grads;
  root.grad = Tensor::full(root.value.shape(), 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = it->get();
    if (node->grad.empty()) continue;
    if (node->backward_fn) {
      GradSink sink(node->inputs);
      node->backward_fn(node->grad, sink);
      // Interior nodes are single-use: release saved state and gradient.
      node->backward_fn = nullptr;
      node->inputs.clear();
      if (node != &root) node->grad = Tensor();
    } else if (node->param) {
      accumulate(grads[node->param], node->grad);
    }
  }
  return grads;
}

}  // namespace mfsr::ndgrad
