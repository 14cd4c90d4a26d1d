#include "dbpc/network.hpp"

#include <cmath>
#include <numeric>

namespace dbpc {
namespace {

LayerSpec fc(std::size_t n) { return {LayerKind::fully_connected, n, 0}; }
LayerSpec conv3(std::size_t channels) { return {LayerKind::convolutional, channels, 3}; }
LayerSpec classifier(std::size_t n) { return {LayerKind::flatten_to_classifier, n, 0}; }
LayerSpec image_input() { return {LayerKind::convolutional, 1, 0}; }

std::string layer_name(std::size_t l) { return "layer " + std::to_string(l); }

void fill_uniform(Tensor& t, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.values()) v = dist(rng);
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::fully_connected: return "fc";
    case LayerKind::convolutional: return "conv";
    case LayerKind::flatten_to_classifier: return "flatten";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
  if (name == "fc") return LayerKind::fully_connected;
  if (name == "conv") return LayerKind::convolutional;
  if (name == "flatten") return LayerKind::flatten_to_classifier;
  throw ArchitectureError("unknown layer kind '" + std::string(name) + "' (fc|conv|flatten)");
}

void validate(const Architecture& arch) {
  const auto& layers = arch.layers;
  if (layers.size() < 2) throw ArchitectureError("a network needs at least two layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].size == 0) throw ArchitectureError(layer_name(l) + " has size 0");
  }
  const LayerSpec& input = layers.front();
  if (input.kind == LayerKind::flatten_to_classifier) {
    throw ArchitectureError("the input layer cannot be a classifier layer");
  }
  if (input.kind == LayerKind::convolutional) {
    if (arch.height == 0 || arch.width == 0) {
      throw ArchitectureError("convolutional input needs a spatial size");
    }
    if (input.kernel != 0) throw ArchitectureError("the input layer has no kernel");
  } else if (arch.height * arch.width != 0 && arch.height * arch.width != input.size) {
    throw ArchitectureError("input layer size " + std::to_string(input.size) +
                            " does not match image " + std::to_string(arch.height) + "x" +
                            std::to_string(arch.width));
  }
  for (std::size_t l = 1; l < layers.size(); ++l) {
    const LayerSpec& prev = layers[l - 1];
    const LayerSpec& cur = layers[l];
    switch (cur.kind) {
      case LayerKind::convolutional:
        if (prev.kind != LayerKind::convolutional) {
          throw ArchitectureError(layer_name(l) + ": convolution must follow a convolutional layer");
        }
        if (cur.kernel % 2 == 0) {
          throw ArchitectureError(layer_name(l) + ": kernel size must be odd, got " +
                                  std::to_string(cur.kernel));
        }
        break;
      case LayerKind::flatten_to_classifier:
        if (prev.kind != LayerKind::convolutional) {
          throw ArchitectureError(layer_name(l) + ": flatten must follow a convolutional layer");
        }
        [[fallthrough]];
      case LayerKind::fully_connected:
        if (cur.kind == LayerKind::fully_connected && prev.kind == LayerKind::convolutional) {
          throw ArchitectureError(layer_name(l) + ": use a flatten layer after convolutions");
        }
        if (cur.kernel != 0) throw ArchitectureError(layer_name(l) + ": only conv layers have kernels");
        break;
    }
  }
}

Architecture preset_architecture(std::string_view name) {
  if (name == "dbpc-fcn-mnist") {
    return {{fc(784), fc(1000), fc(400), fc(100), fc(10)}, 28, 28};
  }
  if (name == "dbpc-cnn-mnist") {
    return {{image_input(), conv3(16), conv3(32), conv3(32), conv3(48), conv3(48), classifier(10)},
            28, 28};
  }
  if (name == "dbpc-cnn-fashion") {
    return {{image_input(), conv3(16), conv3(32), conv3(32), conv3(48), conv3(48), conv3(64),
             conv3(64), conv3(96), conv3(96), classifier(10)},
            28, 28};
  }
  throw ArchitectureError("unknown architecture '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
  return {"dbpc-fcn-mnist", "dbpc-cnn-mnist", "dbpc-cnn-fashion"};
}

WeightBlock WeightBlock::dense(std::size_t n_out, std::size_t n_in) {
  return WeightBlock(Tensor({n_out, n_in}));
}

WeightBlock WeightBlock::conv(std::size_t out_channels, std::size_t in_channels, std::size_t kernel) {
  return WeightBlock(ConvKernel(out_channels, in_channels, kernel));
}

Tensor& WeightBlock::values() {
  if (auto* k = std::get_if<ConvKernel>(&weights_)) return k->weights();
  return std::get<Tensor>(weights_);
}

const Tensor& WeightBlock::values() const {
  if (const auto* k = std::get_if<ConvKernel>(&weights_)) return k->weights();
  return std::get<Tensor>(weights_);
}

Tensor WeightBlock::forward(const Tensor& batch) const {
  if (const auto* k = std::get_if<ConvKernel>(&weights_)) return conv2d_same_batch(batch, *k);
  return matmul_batch(std::get<Tensor>(weights_), batch);
}

Tensor WeightBlock::adjoint(const Tensor& batch) const {
  if (const auto* k = std::get_if<ConvKernel>(&weights_)) return conv2d_adjoint_same_batch(batch, *k);
  return matmul_transpose_batch(std::get<Tensor>(weights_), batch);
}

void WeightBlock::accumulate_grad(Tensor& grad, const Tensor& out_side, const Tensor& in_side,
                                  double scale) const {
  if (is_conv()) {
    accumulate_kernel_grad(grad, out_side, in_side, scale);
  } else {
    accumulate_outer(grad, out_side, in_side, scale);
  }
}

NetworkParams::NetworkParams(Architecture arch) : arch_(std::move(arch)) {
  validate(arch_);
  for (const LayerSpec& spec : arch_.layers) {
    if (spec.kind == LayerKind::convolutional) {
      layer_shapes_.push_back({spec.size, arch_.height, arch_.width});
    } else {
      layer_shapes_.push_back({spec.size});
    }
  }
  for (std::size_t l = 0; l + 1 < arch_.layers.size(); ++l) {
    const LayerSpec& next = arch_.layers[l + 1];
    if (next.kind == LayerKind::convolutional) {
      weights_.push_back(WeightBlock::conv(next.size, arch_.layers[l].size, next.kernel));
    } else {
      weights_.push_back(WeightBlock::dense(next.size, layer_size(l)));
    }
  }
}

NetworkParams::NetworkParams(Architecture arch, std::mt19937_64& rng) : NetworkParams(std::move(arch)) {
  for (auto& block : weights_) {
    Tensor& w = block.values();
    const std::size_t fan_in = w.size() / w.dim(0);
    fill_uniform(w, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
  }
}

Shape NetworkParams::batch_shape(std::size_t l, std::size_t batch) const {
  Shape shape{batch};
  const Shape& sample = layer_shapes_.at(l);
  shape.insert(shape.end(), sample.begin(), sample.end());
  return shape;
}

Tensor NetworkParams::forward(std::size_t interface, const Tensor& batch) const {
  const std::size_t b = batch.dim(0);
  return weights_.at(interface).forward(batch).reshaped(batch_shape(interface + 1, b));
}

Tensor NetworkParams::adjoint(std::size_t interface, const Tensor& batch) const {
  const std::size_t b = batch.dim(0);
  return weights_.at(interface).adjoint(batch).reshaped(batch_shape(interface, b));
}

bool operator==(const NetworkParams& a, const NetworkParams& b) {
  if (!(a.arch_ == b.arch_) || a.weights_.size() != b.weights_.size()) return false;
  for (std::size_t i = 0; i < a.weights_.size(); ++i) {
    if (!(a.weights_[i].values() == b.weights_[i].values())) return false;
  }
  return true;
}

std::size_t param_count(const NetworkParams& params) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.num_interfaces(); ++i) total += params.weights(i).param_count();
  return total;
}

std::size_t param_count(const Architecture& arch) {
  validate(arch);
  const auto& layers = arch.layers;
  const std::size_t plane = arch.height * arch.width;
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const LayerSpec& prev = layers[l];
    const LayerSpec& next = layers[l + 1];
    const std::size_t prev_units =
        prev.kind == LayerKind::convolutional ? prev.size * plane : prev.size;
    if (next.kind == LayerKind::convolutional) {
      total += next.size * prev.size * next.kernel * next.kernel;
    } else {
      total += next.size * prev_units;
    }
  }
  return total;
}

ActivationState make_state(const NetworkParams& params, std::size_t batch) {
  ActivationState state;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    state.y.emplace_back(params.batch_shape(l, batch));
  }
  state.clamped.assign(params.num_layers(), false);
  return state;
}

void Hyperparams::validate() const {
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(name) + " must be a finite value >= 0");
    }
  };
  non_negative(lambda_f, "lambda_f");
  non_negative(lambda_b, "lambda_b");
  non_negative(beta_c, "beta_c");
  non_negative(beta_r, "beta_r");
  non_negative(lr_y, "lr_y");
  non_negative(lr_w, "lr_w");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

}  // namespace dbpc
