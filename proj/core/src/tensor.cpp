#include "dbpc/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace dbpc {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

ConstMatrixMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MatrixMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatrixMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_matrix(const Tensor& w, const char* op) {
  if (w.rank() != 2) {
    throw ShapeError(std::string(op) + ": weight must be a matrix, got " + to_string(w.shape()));
  }
}

std::size_t per_sample(const Tensor& batch, const char* op) {
  if (batch.rank() < 2) {
    throw ShapeError(std::string(op) + ": batch needs a leading sample dimension, got " +
                     to_string(batch.shape()));
  }
  return batch.dim(0) == 0 ? 0 : batch.size() / batch.dim(0);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

// Expands one C x H x W sample into a (C*K*K) x (H*W) patch matrix with zero padding.
void im2col(const double* input, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t k, double* cols) {
  const auto pad = static_cast<std::ptrdiff_t>(same_padding(k));
  const std::size_t plane = height * width;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = cols + ((c * k + ky) * k + kx) * plane;
        const auto dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::size_t y = 0; y < height; ++y) {
          const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
          double* out = row + y * width;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(height)) {
            std::fill(out, out + width, 0.0);
            continue;
          }
          const double* src = input + (c * height + static_cast<std::size_t>(sy)) * width;
          for (std::size_t x = 0; x < width; ++x) {
            const auto sx = static_cast<std::ptrdiff_t>(x) + dx;
            out[x] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(width))
                         ? 0.0
                         : src[static_cast<std::size_t>(sx)];
          }
        }
      }
    }
  }
}

// Transpose of im2col: scatters patch rows back onto the (zero-padded) image.
void col2im(const double* cols, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t k, double* output) {
  const auto pad = static_cast<std::ptrdiff_t>(same_padding(k));
  const std::size_t plane = height * width;
  std::fill(output, output + channels * plane, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = cols + ((c * k + ky) * k + kx) * plane;
        const auto dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::size_t y = 0; y < height; ++y) {
          const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(height)) continue;
          double* dst = output + (c * height + static_cast<std::size_t>(sy)) * width;
          const double* src = row + y * width;
          for (std::size_t x = 0; x < width; ++x) {
            const auto sx = static_cast<std::ptrdiff_t>(x) + dx;
            if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(width)) {
              dst[static_cast<std::size_t>(sx)] += src[x];
            }
          }
        }
      }
    }
  }
}

struct MapGeometry {
  std::size_t batch, channels, height, width;
};

MapGeometry conv_geometry(const Tensor& batch, std::size_t expected_channels, const char* op) {
  if (batch.rank() != 4) {
    throw ShapeError(std::string(op) + ": expected {B, C, H, W}, got " + to_string(batch.shape()));
  }
  if (batch.dim(1) != expected_channels) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(batch.dim(1)) +
                     " channels, kernel expects " + std::to_string(expected_channels));
  }
  return {batch.dim(0), batch.dim(1), batch.dim(2), batch.dim(3)};
}

template <typename F>
Tensor map_values(const Tensor& x, F f) {
  Tensor out(x.shape());
  std::transform(x.values().begin(), x.values().end(), out.values().begin(), f);
  return out;
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << '}';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != values_.size()) {
    throw ShapeError("tensor shape " + to_string(shape_) + " does not hold " +
                     std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t cols = rows.size() == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw ShapeError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), cols}, std::move(values));
}

double& Tensor::at(std::size_t row, std::size_t col) { return values_[row * shape_.at(1) + col]; }

double Tensor::at(std::size_t row, std::size_t col) const {
  return values_[row * shape_.at(1) + col];
}

Tensor Tensor::reshaped(Shape shape) const& { return Tensor(std::move(shape), values_); }

Tensor Tensor::reshaped(Shape shape) && { return Tensor(std::move(shape), std::move(values_)); }

Tensor Tensor::rows(std::size_t first, std::size_t count) const {
  if (rank() == 0 || first + count > shape_[0]) {
    throw ShapeError("row range out of bounds for " + to_string(shape_));
  }
  Shape shape = shape_;
  shape[0] = count;
  const std::size_t stride = shape_[0] == 0 ? 0 : size() / shape_[0];
  return Tensor(std::move(shape),
                std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(first * stride),
                                    values_.begin() + static_cast<std::ptrdiff_t>((first + count) * stride)));
}

void Tensor::set_rows(std::size_t first, const Tensor& block) {
  const std::size_t stride = shape_.at(0) == 0 ? 0 : size() / shape_[0];
  if (block.rank() == 0 || first + block.dim(0) > shape_[0] || block.size() != block.dim(0) * stride) {
    throw ShapeError("cannot write " + to_string(block.shape()) + " into " + to_string(shape_));
  }
  std::copy(block.values().begin(), block.values().end(),
            values_.begin() + static_cast<std::ptrdiff_t>(first * stride));
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_shape(*this, other, "subtract");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Tensor& Tensor::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

void Tensor::add_scaled(const Tensor& other, double scale) {
  require_same_shape(*this, other, "add_scaled");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  out -= b;
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double squared_norm(const Tensor& a) { return dot(a, a); }

ConvKernel::ConvKernel(std::size_t out_channels, std::size_t in_channels, std::size_t size)
    : ConvKernel(Tensor({out_channels, in_channels, size, size})) {}

ConvKernel::ConvKernel(Tensor weights) : weights_(std::move(weights)) {
  if (weights_.rank() != 4 || weights_.dim(2) != weights_.dim(3)) {
    throw InvalidKernel("kernel weights must be out x in x K x K, got " + to_string(weights_.shape()));
  }
  if (weights_.dim(2) % 2 == 0) {
    throw InvalidKernel("kernel size must be odd, got " + std::to_string(weights_.dim(2)));
  }
  if (weights_.dim(0) == 0 || weights_.dim(1) == 0) {
    throw InvalidKernel("kernel needs at least one input and output channel");
  }
}

double& ConvKernel::operator()(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
  const std::size_t k = size();
  return weights_[((o * in_channels() + i) * k + ky) * k + kx];
}

double ConvKernel::operator()(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
  const std::size_t k = size();
  return weights_[((o * in_channels() + i) * k + ky) * k + kx];
}

std::size_t same_padding(std::size_t kernel_size) {
  if (kernel_size % 2 == 0) {
    throw InvalidKernel("kernel size must be odd, got " + std::to_string(kernel_size));
  }
  return (kernel_size - 1) / 2;
}

Tensor matmul(const Tensor& w, const Tensor& x) {
  require_matrix(w, "matmul");
  if (x.rank() != 1 || x.size() != w.dim(1)) {
    throw ShapeError("matmul: cannot apply " + to_string(w.shape()) + " to " + to_string(x.shape()));
  }
  return matmul_batch(w, x.reshaped({1, x.size()})).reshaped({w.dim(0)});
}

Tensor matmul_transpose(const Tensor& w, const Tensor& v) {
  require_matrix(w, "matmul_transpose");
  if (v.rank() != 1 || v.size() != w.dim(0)) {
    throw ShapeError("matmul_transpose: cannot apply transpose of " + to_string(w.shape()) +
                     " to " + to_string(v.shape()));
  }
  return matmul_transpose_batch(w, v.reshaped({1, v.size()})).reshaped({w.dim(1)});
}

Tensor conv2d_same(const Tensor& input, const ConvKernel& kernel) {
  if (input.rank() != 3) {
    throw ShapeError("conv2d_same: expected C x H x W, got " + to_string(input.shape()));
  }
  Shape batched{1, input.dim(0), input.dim(1), input.dim(2)};
  Tensor out = conv2d_same_batch(input.reshaped(batched), kernel);
  return std::move(out).reshaped({kernel.out_channels(), input.dim(1), input.dim(2)});
}

Tensor conv2d_adjoint_same(const Tensor& input, const ConvKernel& kernel) {
  if (input.rank() != 3) {
    throw ShapeError("conv2d_adjoint_same: expected C x H x W, got " + to_string(input.shape()));
  }
  Shape batched{1, input.dim(0), input.dim(1), input.dim(2)};
  Tensor out = conv2d_adjoint_same_batch(input.reshaped(batched), kernel);
  return std::move(out).reshaped({kernel.in_channels(), input.dim(1), input.dim(2)});
}

Tensor relu(const Tensor& x) {
  return map_values(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor relu_prime(const Tensor& x) {
  return map_values(x, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor matmul_batch(const Tensor& w, const Tensor& batch) {
  require_matrix(w, "matmul_batch");
  const std::size_t n_in = per_sample(batch, "matmul_batch");
  if (n_in != w.dim(1)) {
    throw ShapeError("matmul_batch: cannot apply " + to_string(w.shape()) + " to samples of " +
                     to_string(batch.shape()));
  }
  const std::size_t b = batch.dim(0);
  Tensor out({b, w.dim(0)});
  as_matrix(out, b, w.dim(0)).noalias() =
      as_matrix(batch, b, n_in) * as_matrix(w, w.dim(0), w.dim(1)).transpose();
  return out;
}

Tensor matmul_transpose_batch(const Tensor& w, const Tensor& batch) {
  require_matrix(w, "matmul_transpose_batch");
  const std::size_t n_out = per_sample(batch, "matmul_transpose_batch");
  if (n_out != w.dim(0)) {
    throw ShapeError("matmul_transpose_batch: cannot apply transpose of " + to_string(w.shape()) +
                     " to samples of " + to_string(batch.shape()));
  }
  const std::size_t b = batch.dim(0);
  Tensor out({b, w.dim(1)});
  as_matrix(out, b, w.dim(1)).noalias() =
      as_matrix(batch, b, n_out) * as_matrix(w, w.dim(0), w.dim(1));
  return out;
}

void accumulate_outer(Tensor& grad, const Tensor& out_side, const Tensor& in_side, double scale) {
  require_matrix(grad, "accumulate_outer");
  const std::size_t n_out = per_sample(out_side, "accumulate_outer");
  const std::size_t n_in = per_sample(in_side, "accumulate_outer");
  if (n_out != grad.dim(0) || n_in != grad.dim(1) || out_side.dim(0) != in_side.dim(0)) {
    throw ShapeError("accumulate_outer: " + to_string(out_side.shape()) + " x " +
                     to_string(in_side.shape()) + " does not fit " + to_string(grad.shape()));
  }
  const std::size_t b = out_side.dim(0);
  as_matrix(grad, n_out, n_in).noalias() +=
      scale * (as_matrix(out_side, b, n_out).transpose() * as_matrix(in_side, b, n_in));
}

Tensor conv2d_same_batch(const Tensor& batch, const ConvKernel& kernel) {
  const auto g = conv_geometry(batch, kernel.in_channels(), "conv2d_same");
  const std::size_t k = kernel.size();
  const std::size_t plane = g.height * g.width;
  const std::size_t patch = g.channels * k * k;
  Tensor out({g.batch, kernel.out_channels(), g.height, g.width});
  std::vector<double> cols(patch * plane);
  const auto weights = as_matrix(kernel.weights(), kernel.out_channels(), patch);
  for (std::size_t s = 0; s < g.batch; ++s) {
    im2col(batch.data() + s * g.channels * plane, g.channels, g.height, g.width, k, cols.data());
    MatrixMap dst(out.data() + s * kernel.out_channels() * plane,
                  static_cast<Eigen::Index>(kernel.out_channels()), static_cast<Eigen::Index>(plane));
    dst.noalias() = weights * ConstMatrixMap(cols.data(), static_cast<Eigen::Index>(patch),
                                             static_cast<Eigen::Index>(plane));
  }
  return out;
}

Tensor conv2d_adjoint_same_batch(const Tensor& batch, const ConvKernel& kernel) {
  const auto g = conv_geometry(batch, kernel.out_channels(), "conv2d_adjoint_same");
  const std::size_t k = kernel.size();
  const std::size_t plane = g.height * g.width;
  const std::size_t patch = kernel.in_channels() * k * k;
  Tensor out({g.batch, kernel.in_channels(), g.height, g.width});
  RowMatrix cols(static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(plane));
  const auto weights = as_matrix(kernel.weights(), kernel.out_channels(), patch);
  for (std::size_t s = 0; s < g.batch; ++s) {
    ConstMatrixMap src(batch.data() + s * g.channels * plane, static_cast<Eigen::Index>(g.channels),
                       static_cast<Eigen::Index>(plane));
    cols.noalias() = weights.transpose() * src;
    col2im(cols.data(), kernel.in_channels(), g.height, g.width, k,
           out.data() + s * kernel.in_channels() * plane);
  }
  return out;
}

void accumulate_kernel_grad(Tensor& grad, const Tensor& out_side, const Tensor& in_side,
                            double scale) {
  if (grad.rank() != 4 || grad.dim(2) != grad.dim(3)) {
    throw ShapeError("accumulate_kernel_grad: gradient must be out x in x K x K, got " +
                     to_string(grad.shape()));
  }
  const std::size_t k = grad.dim(2);
  const auto g_in = conv_geometry(in_side, grad.dim(1), "accumulate_kernel_grad");
  const auto g_out = conv_geometry(out_side, grad.dim(0), "accumulate_kernel_grad");
  if (g_in.batch != g_out.batch || g_in.height != g_out.height || g_in.width != g_out.width) {
    throw ShapeError("accumulate_kernel_grad: " + to_string(out_side.shape()) + " vs " +
                     to_string(in_side.shape()));
  }
  const std::size_t plane = g_in.height * g_in.width;
  const std::size_t patch = g_in.channels * k * k;
  std::vector<double> cols(patch * plane);
  auto dst = as_matrix(grad, grad.dim(0), patch);
  for (std::size_t s = 0; s < g_in.batch; ++s) {
    im2col(in_side.data() + s * g_in.channels * plane, g_in.channels, g_in.height, g_in.width, k,
           cols.data());
    ConstMatrixMap out(out_side.data() + s * g_out.channels * plane,
                       static_cast<Eigen::Index>(g_out.channels), static_cast<Eigen::Index>(plane));
    dst.noalias() += scale * (out * ConstMatrixMap(cols.data(), static_cast<Eigen::Index>(patch),
                                                   static_cast<Eigen::Index>(plane))
                                        .transpose());
  }
}

}  // namespace dbpc
