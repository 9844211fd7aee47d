#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfsr::ndgrad {

/// Element precision tag. Values are held in double storage; an f32 tensor
/// rounds every stored value to the nearest float after each write, so it
/// carries exactly the information a float array would.
enum class Dtype : std::uint8_t { f32, f64 };

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);
std::string to_string(Dtype dtype);
Dtype parse_dtype(const std::string& text);

/// The wider of the two precisions.
Dtype promote(Dtype a, Dtype b);

/// Raised on incompatible extents. Messages name the offending dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation produces NaN or Inf.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major array. Image batches use NCHW layout.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Dtype dtype = Dtype::f64);
  Tensor(Shape shape, std::vector<double> values, Dtype dtype = Dtype::f64);

  static Tensor full(Shape shape, double value, Dtype dtype = Dtype::f64);
  static Tensor scalar(double value, Dtype dtype = Dtype::f64);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const noexcept { return values_.size(); }
  bool empty() const noexcept { return shape_.empty() && values_.empty(); }
  Dtype dtype() const noexcept { return dtype_; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// The single value of a one-element tensor.
  double item() const;

  /// Same values, new extents. Throws ShapeError if the element count differs.
  Tensor reshape(Shape shape) const;
  Tensor astype(Dtype dtype) const;

  void fill(double value);
  /// Rounds stored values to the tensor's precision (no-op for f64).
  void round_to_dtype();
  bool all_finite() const;

 private:
  Shape shape_;
  Dtype dtype_ = Dtype::f64;
  std::vector<double> values_;
};

/// Throws NumericalError naming `where` if any value is non-finite.
void require_finite(const Tensor& t, const char* where);

/// Elementwise equality of shape, dtype and bit patterns.
bool bit_identical(const Tensor& a, const Tensor& b);

}  // namespace mfsr::ndgrad
