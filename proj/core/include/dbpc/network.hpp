#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dbpc/tensor.hpp"

namespace dbpc {

/// Invalid architecture description.
class ArchitectureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class LayerKind { fully_connected, convolutional, flatten_to_classifier };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

/// One layer of the network.
///
/// `size` is the neuron count for fully-connected and classifier layers and
/// the channel count for convolutional layers. `kernel` is the side length
/// of the kernel connecting the previous layer to this one (convolutional
/// layers after the input only).
struct LayerSpec {
  LayerKind kind = LayerKind::fully_connected;
  std::size_t size = 0;
  std::size_t kernel = 0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Layer list plus the spatial extent of convolutional feature maps.
struct Architecture {
  std::vector<LayerSpec> layers;
  std::size_t height = 0;
  std::size_t width = 0;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Throws ArchitectureError when the layer list cannot be wired up.
void validate(const Architecture& arch);

/// Presets: "dbpc-fcn-mnist", "dbpc-cnn-mnist", "dbpc-cnn-fashion".
Architecture preset_architecture(std::string_view name);
std::vector<std::string> preset_names();

/// Bi-directional weights between layer l and l+1.
///
/// The forward map produces the pre-activation of layer l+1 from layer l;
/// the adjoint map produces the pre-activation of layer l from layer l+1
/// using the same parameters.
class WeightBlock {
 public:
  static WeightBlock dense(std::size_t n_out, std::size_t n_in);
  static WeightBlock conv(std::size_t out_channels, std::size_t in_channels, std::size_t kernel);

  bool is_conv() const { return std::holds_alternative<ConvKernel>(weights_); }
  /// Matrix (n_out x n_in) or kernel (out x in x K x K).
  Tensor& values();
  const Tensor& values() const;
  std::size_t param_count() const { return values().size(); }

  /// Batched forward map; `batch` is {B, ...layer l shape}.
  Tensor forward(const Tensor& batch) const;
  /// Batched adjoint map; `batch` is {B, ...layer l+1 shape}.
  Tensor adjoint(const Tensor& batch) const;
  /// grad += scale * d/dW Σ_b <out_b, forward(in_b)>.
  void accumulate_grad(Tensor& grad, const Tensor& out_side, const Tensor& in_side,
                       double scale) const;

 private:
  explicit WeightBlock(std::variant<Tensor, ConvKernel> w) : weights_(std::move(w)) {}
  std::variant<Tensor, ConvKernel> weights_;
};

/// Layer specs and the shared weights of every adjacent layer pair.
class NetworkParams {
 public:
  /// Zero-initialised weights.
  explicit NetworkParams(Architecture arch);
  /// Weights drawn uniformly from ±sqrt(6 / fan_in).
  NetworkParams(Architecture arch, std::mt19937_64& rng);

  const Architecture& architecture() const { return arch_; }
  const std::vector<LayerSpec>& specs() const { return arch_.layers; }
  std::size_t num_layers() const { return arch_.layers.size(); }
  std::size_t num_interfaces() const { return weights_.size(); }

  /// Shape of one sample's activity at layer `l` (zero-based; 0 is the input).
  const Shape& layer_shape(std::size_t l) const { return layer_shapes_.at(l); }
  std::size_t layer_size(std::size_t l) const { return shape_size(layer_shapes_.at(l)); }
  /// {batch, ...layer_shape(l)}
  Shape batch_shape(std::size_t l, std::size_t batch) const;

  WeightBlock& weights(std::size_t interface) { return weights_.at(interface); }
  const WeightBlock& weights(std::size_t interface) const { return weights_.at(interface); }

  /// Pre-activation of layer l+1 from activities of layer l.
  Tensor forward(std::size_t interface, const Tensor& batch) const;
  /// Pre-activation of layer l from activities of layer l+1.
  Tensor adjoint(std::size_t interface, const Tensor& batch) const;

  friend bool operator==(const NetworkParams& a, const NetworkParams& b);

 private:
  Architecture arch_;
  std::vector<Shape> layer_shapes_;
  std::vector<WeightBlock> weights_;
};

/// Total scalar weights; there are no biases.
std::size_t param_count(const NetworkParams& params);
/// Same count, computed from the architecture alone.
std::size_t param_count(const Architecture& arch);

/// Per-layer activities for a batch of samples, plus clamp flags.
struct ActivationState {
  std::vector<Tensor> y;
  std::vector<bool> clamped;

  std::size_t num_layers() const { return y.size(); }
  std::size_t batch_size() const { return y.empty() ? 0 : y.front().dim(0); }
};

/// Zero activities, nothing clamped.
ActivationState make_state(const NetworkParams& params, std::size_t batch);

struct Hyperparams {
  double lambda_f = 1.0;   // feedforward factor in the representation energy
  double lambda_b = 0.1;   // feedback factor in the representation energy
  double beta_c = 3.0;     // classification factor in the weight energy
  double beta_r = 0.5;     // reconstruction factor in the weight energy
  double lr_y = 0.1;
  double lr_w = 1e-2;
  std::size_t iterations = 20;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

}  // namespace dbpc
