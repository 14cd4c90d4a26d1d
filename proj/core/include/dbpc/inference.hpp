#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "dbpc/data.hpp"
#include "dbpc/dbpc.hpp"
#include "dbpc/metrics.hpp"
#include "dbpc/network.hpp"

namespace dbpc {

/// feedforward: one bottom-up sweep. iterative: input clamped, every other
/// layer relaxed for hp.iterations steps starting from that sweep.
enum class ClassifyMode { feedforward, iterative };

std::string_view to_string(ClassifyMode mode);
ClassifyMode parse_classify_mode(std::string_view name);

/// Index of the largest value; the lowest index wins ties.
std::size_t argmax(std::span<const double> values);

struct ClassificationResult {
  std::size_t predicted_class = 0;
  Tensor output_activity;
  ClassifyMode mode = ClassifyMode::feedforward;
};

ClassificationResult classify(const NetworkParams& params, const Tensor& x, const Hyperparams& hp,
                              ClassifyMode mode = ClassifyMode::feedforward);

/// Input clamped to `inputs`, free layers swept then relaxed (test-time inference).
ActivationState estimate_representations(const NetworkParams& params, const Tensor& inputs,
                                         const Hyperparams& hp);

struct ReconstructionResult {
  std::size_t source_layer = 0;
  Tensor image;  // input layer shape
};

/// Feedback chain relu(W_iᵀ ·) from layer `l` of sample `sample` down to the input.
ReconstructionResult reconstruct_from_layer(const NetworkParams& params, const ActivationState& state,
                                            std::size_t l, std::size_t sample = 0);
/// Estimates representations for `x` first, then reconstructs from layer `l`.
ReconstructionResult reconstruct_from_input(const NetworkParams& params, const Tensor& x,
                                            const Hyperparams& hp, std::size_t l);
/// Batched feedback chain; returns {B, ...input layer shape}.
Tensor reconstruct_batch(const NetworkParams& params, const ActivationState& state, std::size_t l);

/// Hidden layers 1..L-2; the class layer is not a reconstruction source.
std::vector<std::size_t> reconstruction_layers(const NetworkParams& params);

struct LayerQuality {
  std::size_t layer = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricsReport {
  std::size_t samples = 0;
  double accuracy = 0.0;
  ConfusionMatrix confusion{kNumClasses};
  std::vector<LayerQuality> layers;  // mean over reconstructed samples, ordered by depth
  std::size_t reconstructed = 0;
};

struct EvalOptions {
  ClassifyMode mode = ClassifyMode::feedforward;
  /// Reconstruction metrics over the first `reconstruction_limit` samples; 0 means all.
  std::size_t reconstruction_limit = 0;
  bool reconstruct = true;
  double max_intensity = 1.0;
};

MetricsReport evaluate(const NetworkParams& params, const ImageDataset& data, const Hyperparams& hp,
                       const EvalOptions& options = {}, const Execution& exec = {});

}  // namespace dbpc
