#pragma once

// Representation learning and model learning for bi-directional predictive
// coding networks.
//
// Layers are zero-based: layer 0 is the input and layer L-1 the class layer.
// Interface i joins layers i and i+1 through one weight block W_i:
//
//   feedforward prediction of layer i+1:  relu(W_i y_i)
//   feedback prediction of layer i:       relu(W_iᵀ y_{i+1})
//
// and carries two squared prediction errors, e_i^ff at layer i+1 and e_i^fb at
// layer i. All quantities are batched: every activity tensor has the sample
// index as its leading dimension and energies are summed over the batch.

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dbpc/network.hpp"
#include "dbpc/parallel.hpp"

namespace dbpc {

/// Bad labels, mismatched input shapes, empty datasets.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Both pre-activations and residuals of one interface.
struct InterfaceTerms {
  Tensor pre_ff;       // W_i y_i, layer i+1 shape
  Tensor pre_fb;       // W_iᵀ y_{i+1}, layer i shape
  Tensor residual_ff;  // y_{i+1} - relu(pre_ff)
  Tensor residual_fb;  // y_i - relu(pre_fb)
};

std::vector<InterfaceTerms> interface_terms(const NetworkParams& params, const ActivationState& state);

/// relu(W_{l-1} y_{l-1}); requires 1 <= l <= L-1.
Tensor feedforward_predict(const NetworkParams& params, const ActivationState& state, std::size_t l);
/// relu(W_lᵀ y_{l+1}); requires l <= L-2.
Tensor feedback_predict(const NetworkParams& params, const ActivationState& state, std::size_t l);

/// Element-wise squared errors, indexed by interface.
struct PredictionErrors {
  std::vector<Tensor> feedforward;  // e_i^ff = (y_{i+1} - ŷ_{i+1}^ff)²
  std::vector<Tensor> feedback;     // e_i^fb = (y_i - ŷ_i^fb)²
};

PredictionErrors prediction_errors(const NetworkParams& params, const ActivationState& state);

/// Local energy of layer l: λ_f (e_{l-1}^ff + e_l^ff) + λ_b (e_{l-1}^fb + e_l^fb),
/// keeping only interfaces that exist.
double representation_energy(const NetworkParams& params, const ActivationState& state,
                             const Hyperparams& hp, std::size_t l);
/// Σ_i λ_f |e_i^ff| + λ_b |e_i^fb|; representation steps descend this.
double global_energy(const NetworkParams& params, const ActivationState& state, const Hyperparams& hp);

/// Gradient of representation_energy(l) with respect to y_l.
Tensor representation_grad(const NetworkParams& params, const ActivationState& state,
                           const Hyperparams& hp, std::size_t l);

/// One simultaneous update of every free layer from the pre-update state.
void representation_step(const NetworkParams& params, ActivationState& state, const Hyperparams& hp);

/// Feedforward sweep into every free layer, bottom-up.
void initialize_free_layers(const NetworkParams& params, ActivationState& state);

/// hp.iterations representation steps. If `energy_trace` is given it receives
/// the global energy before the first step and after every step.
void infer_representations(const NetworkParams& params, ActivationState& state, const Hyperparams& hp,
                           std::vector<double>* energy_trace = nullptr);

/// β_c |e_i^ff| + β_r |e_i^fb| for interface i.
double weight_energy(const NetworkParams& params, const ActivationState& state, const Hyperparams& hp,
                     std::size_t interface);

/// Gradient of weight_energy(i) with respect to W_i, summed over the batch.
/// Covers both the forward use of W_i and its transposed use.
Tensor weight_grad(const NetworkParams& params, const ActivationState& state, const Hyperparams& hp,
                   std::size_t interface);

/// Weight gradients for every interface, summed over the batch.
std::vector<Tensor> weight_grads(const NetworkParams& params, const ActivationState& state,
                                 const Hyperparams& hp);

/// W_i -= lr_w * grads[i] / batch_size for every interface.
void apply_weight_grads(NetworkParams& params, std::span<const Tensor> grads, double lr_w,
                        std::size_t batch_size);

/// One weight update from an inferred state, using the batch-mean gradient.
void weight_step(NetworkParams& params, const ActivationState& state, const Hyperparams& hp);

/// Clamped state for a batch: input at layer 0, optional one-hot labels at
/// the top, free layers initialised by a feedforward sweep.
ActivationState clamp_batch(const NetworkParams& params, const Tensor& inputs,
                            std::span<const int> labels = {});

struct BatchStats {
  std::size_t samples = 0;
  double energy_initial = 0.0;   // global energy after the feedforward sweep
  double energy_inferred = 0.0;  // global energy after inference
};

/// Representations are inferred per sample (in fixed chunks of `exec.chunk`
/// samples, possibly concurrently); weight gradients are reduced in chunk
/// order and applied once as a batch mean. Results do not depend on
/// `exec.threads`.
BatchStats train_batch(NetworkParams& params, const Tensor& inputs, std::span<const int> labels,
                       const Hyperparams& hp, const Execution& exec = {});

}  // namespace dbpc
