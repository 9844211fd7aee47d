#include "mfsr/ndgrad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

namespace mfsr::ndgrad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::string to_string(Dtype dtype) { return dtype == Dtype::f32 ? "f32" : "f64"; }

Dtype parse_dtype(const std::string& text) {
  if (text == "f32") return Dtype::f32;
  if (text == "f64") return Dtype::f64;
  throw std::invalid_argument("unknown dtype '" + text + "'");
}

Dtype promote(Dtype a, Dtype b) {
  return (a == Dtype::f64 || b == Dtype::f64) ? Dtype::f64 : Dtype::f32;
}

Tensor::Tensor(Shape shape, Dtype dtype)
    : shape_(std::move(shape)), dtype_(dtype), values_(ndgrad::numel(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> values, Dtype dtype)
    : shape_(std::move(shape)), dtype_(dtype), values_(std::move(values)) {
  if (ndgrad::numel(shape_) != values_.size()) {
    throw ShapeError("tensor of shape " + to_string(shape_) + " needs " +
                     std::to_string(ndgrad::numel(shape_)) + " values, got " +
                     std::to_string(values_.size()));
  }
  round_to_dtype();
}

Tensor Tensor::full(Shape shape, double value, Dtype dtype) {
  Tensor t(std::move(shape), dtype);
  t.fill(value);
  return t;
}

Tensor Tensor::scalar(double value, Dtype dtype) { return Tensor({1}, {value}, dtype); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape_));
  }
  return shape_[axis];
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(shape_));
  }
  return values_[0];
}

Tensor Tensor::reshape(Shape shape) const {
  if (ndgrad::numel(shape) != values_.size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

Tensor Tensor::astype(Dtype dtype) const {
  Tensor out = *this;
  out.dtype_ = dtype;
  out.round_to_dtype();
  return out;
}

void Tensor::fill(double value) {
  std::fill(values_.begin(), values_.end(), value);
  round_to_dtype();
}

void Tensor::round_to_dtype() {
  if (dtype_ == Dtype::f32) {
    for (double& v : values_) v = static_cast<double>(static_cast<float>(v));
  }
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const Tensor& t, const char* where) {
  if (!t.all_finite()) {
    throw NumericalError(std::string("non-finite value produced by ") + where);
  }
}

bool bit_identical(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.dtype() != b.dtype()) return false;
  return a.numel() == 0 ||
         std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace mfsr::ndgrad
