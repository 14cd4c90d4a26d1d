#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbpc {

using Shape = std::vector<std::size_t>;

/// Thrown when operand shapes are incompatible.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown for malformed convolution kernels (even size, empty dimensions).
class InvalidKernel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Feature maps are channels-first (C x H x W). Batched operands carry the
/// sample index as their leading dimension.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double& at(std::size_t row, std::size_t col);
  double at(std::size_t row, std::size_t col) const;

  /// Same values, new shape of equal element count.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  /// Contiguous slice [first, first + count) along the leading dimension.
  Tensor rows(std::size_t first, std::size_t count) const;
  /// Writes `block` into rows [first, first + block.dim(0)).
  void set_rows(std::size_t first, const Tensor& block);

  void fill(double value);
  bool all_finite() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double scale);
  /// this += scale * other
  void add_scaled(const Tensor& other, double scale);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

Tensor operator-(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);

/// Frobenius inner product.
double dot(const Tensor& a, const Tensor& b);
double squared_norm(const Tensor& a);

/// Square convolution kernel, weights laid out out x in x K x K.
class ConvKernel {
 public:
  ConvKernel(std::size_t out_channels, std::size_t in_channels, std::size_t size);
  explicit ConvKernel(Tensor weights);

  std::size_t out_channels() const { return weights_.dim(0); }
  std::size_t in_channels() const { return weights_.dim(1); }
  std::size_t size() const { return weights_.dim(2); }
  /// Zero padding that keeps spatial dimensions: (K - 1) / 2.
  std::size_t padding() const { return (size() - 1) / 2; }

  Tensor& weights() { return weights_; }
  const Tensor& weights() const { return weights_; }

  double& operator()(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx);
  double operator()(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const;

 private:
  Tensor weights_;
};

/// Zero padding used by a same-shape convolution with a K x K kernel.
std::size_t same_padding(std::size_t kernel_size);

// Single-sample operations.

/// y = W x for W of shape n_out x n_in.
Tensor matmul(const Tensor& w, const Tensor& x);
/// Wᵀ v for W of shape n_out x n_in.
Tensor matmul_transpose(const Tensor& w, const Tensor& v);
/// Stride-1 convolution with zero padding (K-1)/2; C_in x H x W -> C_out x H x W.
Tensor conv2d_same(const Tensor& input, const ConvKernel& kernel);
/// Exact adjoint of conv2d_same; C_out x H x W -> C_in x H x W.
Tensor conv2d_adjoint_same(const Tensor& input, const ConvKernel& kernel);

Tensor relu(const Tensor& x);
/// 1 where x > 0, else 0 (including x == 0).
Tensor relu_prime(const Tensor& x);

// Batched operations. The leading dimension indexes samples; for the dense
// ops, the remaining dimensions are flattened.

/// Each sample x_b -> W x_b. Result shape is {B, n_out}.
Tensor matmul_batch(const Tensor& w, const Tensor& batch);
/// Each sample v_b -> Wᵀ v_b. Result shape is {B, n_in}.
Tensor matmul_transpose_batch(const Tensor& w, const Tensor& batch);
/// grad += scale * Σ_b out_b in_bᵀ.
void accumulate_outer(Tensor& grad, const Tensor& out_side, const Tensor& in_side, double scale);

/// {B, C_in, H, W} -> {B, C_out, H, W}.
Tensor conv2d_same_batch(const Tensor& batch, const ConvKernel& kernel);
/// {B, C_out, H, W} -> {B, C_in, H, W}.
Tensor conv2d_adjoint_same_batch(const Tensor& batch, const ConvKernel& kernel);
/// Kernel gradient of Σ_b <out_b, conv(in_b)>, scaled and added to `grad`
/// (shape out x in x K x K).
void accumulate_kernel_grad(Tensor& grad, const Tensor& out_side, const Tensor& in_side,
                            double scale);

}  // namespace dbpc
