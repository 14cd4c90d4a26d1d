#include "dbpc/dbpc.hpp"

#include <string>

namespace dbpc {
namespace {

// relu'(pre) ⊙ residual
Tensor gated(const Tensor& pre, const Tensor& residual) {
  Tensor out(residual.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pre[i] > 0.0 ? residual[i] : 0.0;
  return out;
}

// y - relu(pre)
Tensor residual(const Tensor& y, const Tensor& pre) {
  Tensor out(y.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = y[i] - (pre[i] > 0.0 ? pre[i] : 0.0);
  return out;
}

void check_layer(const NetworkParams& params, std::size_t l, std::size_t lo, std::size_t hi,
                 const char* op) {
  if (l < lo || l > hi || l >= params.num_layers()) {
    throw std::out_of_range(std::string(op) + ": layer " + std::to_string(l) + " outside [" +
                            std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

void check_interface(const NetworkParams& params, std::size_t i, const char* op) {
  if (i >= params.num_interfaces()) {
    throw std::out_of_range(std::string(op) + ": interface " + std::to_string(i) + " out of range");
  }
}

double energy_from_terms(const std::vector<InterfaceTerms>& terms, double w_ff, double w_fb) {
  double total = 0.0;
  for (const auto& t : terms) {
    if (w_ff != 0.0) total += w_ff * squared_norm(t.residual_ff);
    if (w_fb != 0.0) total += w_fb * squared_norm(t.residual_fb);
  }
  return total;
}

Tensor grad_from_terms(const NetworkParams& params, const ActivationState& state,
                       const std::vector<InterfaceTerms>& terms, const Hyperparams& hp,
                       std::size_t l) {
  Tensor g(state.y[l].shape());
  if (l >= 1) {
    const InterfaceTerms& below = terms[l - 1];
    if (hp.lambda_f != 0.0) g.add_scaled(below.residual_ff, 2.0 * hp.lambda_f);
    if (hp.lambda_b != 0.0) {
      g.add_scaled(params.forward(l - 1, gated(below.pre_fb, below.residual_fb)), -2.0 * hp.lambda_b);
    }
  }
  if (l + 1 < params.num_layers()) {
    const InterfaceTerms& above = terms[l];
    if (hp.lambda_b != 0.0) g.add_scaled(above.residual_fb, 2.0 * hp.lambda_b);
    if (hp.lambda_f != 0.0) {
      g.add_scaled(params.adjoint(l, gated(above.pre_ff, above.residual_ff)), -2.0 * hp.lambda_f);
    }
  }
  return g;
}

Tensor weight_grad_from_terms(const NetworkParams& params, const ActivationState& state,
                              const std::vector<InterfaceTerms>& terms, const Hyperparams& hp,
                              std::size_t i) {
  const WeightBlock& block = params.weights(i);
  const InterfaceTerms& t = terms[i];
  Tensor grad(block.values().shape());
  if (hp.beta_c != 0.0) {
    block.accumulate_grad(grad, gated(t.pre_ff, t.residual_ff), state.y[i], -2.0 * hp.beta_c);
  }
  if (hp.beta_r != 0.0) {
    block.accumulate_grad(grad, state.y[i + 1], gated(t.pre_fb, t.residual_fb), -2.0 * hp.beta_r);
  }
  return grad;
}

InterfaceTerms terms_for(const NetworkParams& params, const ActivationState& state, std::size_t i) {
  InterfaceTerms t;
  t.pre_ff = params.forward(i, state.y[i]);
  t.pre_fb = params.adjoint(i, state.y[i + 1]);
  t.residual_ff = residual(state.y[i + 1], t.pre_ff);
  t.residual_fb = residual(state.y[i], t.pre_fb);
  return t;
}

std::vector<InterfaceTerms> all_terms(const NetworkParams& params, const ActivationState& state,
                                      std::size_t threads) {
  std::vector<InterfaceTerms> terms(params.num_interfaces());
  parallel_for(terms.size(), threads, [&](std::size_t i) { terms[i] = terms_for(params, state, i); });
  return terms;
}

// Runs hp.iterations Jacobi steps and returns the terms of the final state.
// Interfaces and layers are independent within a step, so `threads` only
// changes scheduling.
std::vector<InterfaceTerms> relax(const NetworkParams& params, ActivationState& state,
                                  const Hyperparams& hp, std::vector<double>* trace,
                                  std::size_t threads = 1) {
  std::vector<InterfaceTerms> terms = all_terms(params, state, threads);
  for (std::size_t k = 0; k < hp.iterations; ++k) {
    if (trace) trace->push_back(energy_from_terms(terms, hp.lambda_f, hp.lambda_b));
    if (hp.lr_y != 0.0) {
      std::vector<Tensor> grads(state.num_layers());
      parallel_for(state.num_layers(), threads, [&](std::size_t l) {
        if (!state.clamped[l]) grads[l] = grad_from_terms(params, state, terms, hp, l);
      });
      for (std::size_t l = 0; l < state.num_layers(); ++l) {
        if (!state.clamped[l]) state.y[l].add_scaled(grads[l], -hp.lr_y);
      }
    }
    terms = all_terms(params, state, threads);
  }
  if (trace) trace->push_back(energy_from_terms(terms, hp.lambda_f, hp.lambda_b));
  return terms;
}

}  // namespace

std::vector<InterfaceTerms> interface_terms(const NetworkParams& params, const ActivationState& state) {
  if (state.num_layers() != params.num_layers()) {
    throw ShapeError("state has " + std::to_string(state.num_layers()) + " layers, network has " +
                     std::to_string(params.num_layers()));
  }
  return all_terms(params, state, 1);
}

Tensor feedforward_predict(const NetworkParams& params, const ActivationState& state, std::size_t l) {
  check_layer(params, l, 1, params.num_layers() - 1, "feedforward_predict");
  return relu(params.forward(l - 1, state.y[l - 1]));
}

Tensor feedback_predict(const NetworkParams& params, const ActivationState& state, std::size_t l) {
  check_layer(params, l, 0, params.num_layers() - 2, "feedback_predict");
  return relu(params.adjoint(l, state.y[l + 1]));
}

PredictionErrors prediction_errors(const NetworkParams& params, const ActivationState& state) {
  PredictionErrors errors;
  for (auto& t : interface_terms(params, state)) {
    errors.feedforward.push_back(hadamard(t.residual_ff, t.residual_ff));
    errors.feedback.push_back(hadamard(t.residual_fb, t.residual_fb));
  }
  return errors;
}

double representation_energy(const NetworkParams& params, const ActivationState& state,
                             const Hyperparams& hp, std::size_t l) {
  check_layer(params, l, 0, params.num_layers() - 1, "representation_energy");
  const auto terms = interface_terms(params, state);
  double energy = 0.0;
  if (l >= 1) {
    energy += hp.lambda_f * squared_norm(terms[l - 1].residual_ff);
    energy += hp.lambda_b * squared_norm(terms[l - 1].residual_fb);
  }
  if (l + 1 < params.num_layers()) {
    energy += hp.lambda_f * squared_norm(terms[l].residual_ff);
    energy += hp.lambda_b * squared_norm(terms[l].residual_fb);
  }
  return energy;
}

double global_energy(const NetworkParams& params, const ActivationState& state, const Hyperparams& hp) {
  return energy_from_terms(interface_terms(params, state), hp.lambda_f, hp.lambda_b);
}

Tensor representation_grad(const NetworkParams& params, const ActivationState& state,
                           const Hyperparams& hp, std::size_t l) {
  check_layer(params, l, 0, params.num_layers() - 1, "representation_grad");
  if (state.clamped.at(l)) {
    throw std::logic_error("representation_grad: layer " + std::to_string(l) + " is clamped");
  }
  return grad_from_terms(params, state, interface_terms(params, state), hp, l);
}

void representation_step(const NetworkParams& params, ActivationState& state, const Hyperparams& hp) {
  Hyperparams one = hp;
  one.iterations = 1;
  relax(params, state, one, nullptr);
}

void initialize_free_layers(const NetworkParams& params, ActivationState& state) {
  for (std::size_t l = 1; l < params.num_layers(); ++l) {
    if (!state.clamped[l]) state.y[l] = relu(params.forward(l - 1, state.y[l - 1]));
  }
}

void infer_representations(const NetworkParams& params, ActivationState& state, const Hyperparams& hp,
                           std::vector<double>* energy_trace) {
  if (hp.iterations == 0) {
    if (energy_trace) energy_trace->push_back(global_energy(params, state, hp));
    return;
  }
  relax(params, state, hp, energy_trace);
}

double weight_energy(const NetworkParams& params, const ActivationState& state, const Hyperparams& hp,
                     std::size_t interface) {
  check_interface(params, interface, "weight_energy");
  const auto terms = interface_terms(params, state);
  return hp.beta_c * squared_norm(terms[interface].residual_ff) +
         hp.beta_r * squared_norm(terms[interface].residual_fb);
}

Tensor weight_grad(const NetworkParams& params, const ActivationState& state, const Hyperparams& hp,
                   std::size_t interface) {
  check_interface(params, interface, "weight_grad");
  return weight_grad_from_terms(params, state, interface_terms(params, state), hp, interface);
}

std::vector<Tensor> weight_grads(const NetworkParams& params, const ActivationState& state,
                                 const Hyperparams& hp) {
  const auto terms = interface_terms(params, state);
  std::vector<Tensor> grads;
  for (std::size_t i = 0; i < params.num_interfaces(); ++i) {
    grads.push_back(weight_grad_from_terms(params, state, terms, hp, i));
  }
  return grads;
}

void apply_weight_grads(NetworkParams& params, std::span<const Tensor> grads, double lr_w,
                        std::size_t batch_size) {
  if (grads.size() != params.num_interfaces()) {
    throw ShapeError("expected one gradient per interface");
  }
  if (batch_size == 0 || lr_w == 0.0) return;
  const double scale = -lr_w / static_cast<double>(batch_size);
  for (std::size_t i = 0; i < grads.size(); ++i) params.weights(i).values().add_scaled(grads[i], scale);
}

void weight_step(NetworkParams& params, const ActivationState& state, const Hyperparams& hp) {
  const auto grads = weight_grads(params, state, hp);
  apply_weight_grads(params, grads, hp.lr_w, state.batch_size());
}

ActivationState clamp_batch(const NetworkParams& params, const Tensor& inputs,
                            std::span<const int> labels) {
  if (inputs.rank() == 0) throw DataError("input batch has no sample dimension");
  const std::size_t batch = inputs.dim(0);
  if (inputs.size() != batch * params.layer_size(0)) {
    throw DataError("input batch " + to_string(inputs.shape()) + " does not match input layer " +
                    to_string(params.layer_shape(0)));
  }
  ActivationState state = make_state(params, batch);
  state.y[0] = inputs.reshaped(params.batch_shape(0, batch));
  state.clamped[0] = true;
  if (!labels.empty()) {
    if (labels.size() != batch) {
      throw DataError(std::to_string(labels.size()) + " labels for " + std::to_string(batch) +
                      " samples");
    }
    const std::size_t top = params.num_layers() - 1;
    const std::size_t classes = params.layer_size(top);
    Tensor& target = state.y[top];
    target.fill(0.0);
    for (std::size_t s = 0; s < batch; ++s) {
      if (labels[s] < 0 || static_cast<std::size_t>(labels[s]) >= classes) {
        throw DataError("label " + std::to_string(labels[s]) + " outside 0.." +
                        std::to_string(classes - 1));
      }
      target[s * classes + static_cast<std::size_t>(labels[s])] = 1.0;
    }
    state.clamped[top] = true;
  }
  initialize_free_layers(params, state);
  return state;
}

BatchStats train_batch(NetworkParams& params, const Tensor& inputs, std::span<const int> labels,
                       const Hyperparams& hp, const Execution& exec) {
  const std::size_t batch = inputs.rank() == 0 ? 0 : inputs.dim(0);
  if (labels.size() != batch) {
    throw DataError(std::to_string(labels.size()) + " labels for " + std::to_string(batch) + " samples");
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= params.layer_size(params.num_layers() - 1)) {
      throw DataError("label " + std::to_string(label) + " out of range");
    }
  }
  BatchStats stats;
  stats.samples = batch;
  if (batch == 0) return stats;

  const std::size_t chunk = std::max<std::size_t>(exec.chunk, 1);
  const std::size_t chunks = (batch + chunk - 1) / chunk;
  std::vector<std::vector<Tensor>> chunk_grads(chunks);
  std::vector<BatchStats> chunk_stats(chunks);

  // Spare threads go to the layers of a chunk when there are fewer chunks than threads.
  const std::size_t outer = std::min(exec.threads, chunks);
  const std::size_t inner = std::max<std::size_t>(exec.threads / std::max<std::size_t>(outer, 1), 1);
  parallel_for(chunks, outer, [&](std::size_t c) {
    const std::size_t first = c * chunk;
    const std::size_t count = std::min(chunk, batch - first);
    ActivationState state = clamp_batch(params, inputs.rows(first, count), labels.subspan(first, count));
    std::vector<double> trace;
    const auto terms = relax(params, state, hp, &trace, inner);
    chunk_stats[c].energy_initial = trace.front();
    chunk_stats[c].energy_inferred = trace.back();
    chunk_grads[c].resize(params.num_interfaces());
    parallel_for(params.num_interfaces(), inner, [&](std::size_t i) {
      chunk_grads[c][i] = weight_grad_from_terms(params, state, terms, hp, i);
    });
  });

  std::vector<Tensor> total = std::move(chunk_grads[0]);
  for (std::size_t c = 1; c < chunks; ++c) {
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += chunk_grads[c][i];
  }
  for (const auto& s : chunk_stats) {
    stats.energy_initial += s.energy_initial;
    stats.energy_inferred += s.energy_inferred;
  }
  apply_weight_grads(params, total, hp.lr_w, batch);
  return stats;
}

}  // namespace dbpc
