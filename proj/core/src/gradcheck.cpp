#include "dbpc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace dbpc {
namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Sign pattern of every pre-activation; the energy is quadratic while it is fixed.
std::vector<bool> activation_pattern(const NetworkParams& params, const ActivationState& state) {
  std::vector<bool> pattern;
  for (const auto& t : interface_terms(params, state)) {
    for (double v : t.pre_ff.values()) pattern.push_back(v > 0.0);
    for (double v : t.pre_fb.values()) pattern.push_back(v > 0.0);
  }
  return pattern;
}

Hyperparams random_factors(std::mt19937_64& rng) {
  Hyperparams hp;
  hp.lambda_f = uniform(rng, 0.25, 2.0);
  hp.lambda_b = uniform(rng, 0.25, 2.0);
  hp.beta_c = uniform(rng, 0.25, 2.0);
  hp.beta_r = uniform(rng, 0.25, 2.0);
  return hp;
}

struct Accumulator {
  SuiteResult result;
  const GradcheckOptions& options;

  // Compares `analytic` against central differences of `energy` as `value`
  // (an element of the perturbed tensor) moves by ±step.
  void check(const Tensor& analytic, Tensor& perturbed, const std::function<double()>& energy,
             const std::function<std::vector<bool>()>& pattern) {
    for (std::size_t j = 0; j < perturbed.size(); ++j) {
      const double saved = perturbed[j];
      perturbed[j] = saved + options.step;
      const double e_plus = energy();
      const auto p_plus = pattern();
      perturbed[j] = saved - options.step;
      const double e_minus = energy();
      const auto p_minus = pattern();
      perturbed[j] = saved;
      if (p_plus != p_minus) {
        ++result.skipped;
        continue;
      }
      const double numeric = (e_plus - e_minus) / (2.0 * options.step);
      const double a = analytic[j] * (1.0 + options.corrupt);
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.components;
    }
  }
};

void check_instance(const NetworkParams& net, std::mt19937_64& rng, Accumulator& repr,
                    Accumulator& weight) {
  NetworkParams params = net;
  const Hyperparams hp = random_factors(rng);
  ActivationState state = random_state(params, pick(rng, 1, 2), rng);
  state.clamped[0] = true;
  // Half the instances use training clamps (top fixed), half test-time clamps.
  state.clamped.back() = pick(rng, 0, 1) == 1;
  auto pattern = [&] { return activation_pattern(params, state); };

  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    if (state.clamped[l]) continue;
    const Tensor g = representation_grad(params, state, hp, l);
    repr.check(g, state.y[l], [&] { return representation_energy(params, state, hp, l); }, pattern);
  }
  for (std::size_t i = 0; i < params.num_interfaces(); ++i) {
    const Tensor g = weight_grad(params, state, hp, i);
    weight.check(g, params.weights(i).values(), [&] { return weight_energy(params, state, hp, i); },
                 pattern);
  }
  ++repr.result.instances;
  ++weight.result.instances;
}

}  // namespace

NetworkParams random_fc_network(std::mt19937_64& rng) {
  Architecture arch;
  const std::size_t depth = pick(rng, 3, 5);
  for (std::size_t l = 0; l < depth; ++l) arch.layers.push_back({LayerKind::fully_connected, pick(rng, 2, 16), 0});
  return NetworkParams(arch, rng);
}

NetworkParams random_conv_network(std::mt19937_64& rng) {
  Architecture arch;
  arch.height = pick(rng, 2, 6);
  arch.width = pick(rng, 2, 6);
  arch.layers.push_back({LayerKind::convolutional, pick(rng, 1, 3), 0});
  const std::size_t depth = pick(rng, 2, 3);
  const bool classifier = pick(rng, 0, 1) == 1;
  for (std::size_t l = 1; l < depth; ++l) {
    if (classifier && l + 1 == depth) {
      arch.layers.push_back({LayerKind::flatten_to_classifier, pick(rng, 2, 5), 0});
    } else {
      arch.layers.push_back({LayerKind::convolutional, pick(rng, 1, 3), 2 * pick(rng, 0, 2) + 1});
    }
  }
  return NetworkParams(arch, rng);
}

ActivationState random_state(const NetworkParams& params, std::size_t batch, std::mt19937_64& rng) {
  ActivationState state = make_state(params, batch);
  for (Tensor& y : state.y) {
    for (double& v : y.values()) v = uniform(rng, 0.0, 1.0);
  }
  return state;
}

std::vector<SuiteResult> run_gradcheck(const GradcheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  Accumulator fc_repr{{"representation/fc"}, options};
  Accumulator fc_weight{{"weight/fc"}, options};
  Accumulator conv_repr{{"representation/conv"}, options};
  Accumulator conv_weight{{"weight/conv"}, options};
  for (std::size_t n = 0; n < options.fc_instances; ++n) {
    check_instance(random_fc_network(rng), rng, fc_repr, fc_weight);
  }
  for (std::size_t n = 0; n < options.conv_instances; ++n) {
    check_instance(random_conv_network(rng), rng, conv_repr, conv_weight);
  }
  std::vector<SuiteResult> results;
  for (Accumulator* acc : {&fc_repr, &fc_weight, &conv_repr, &conv_weight}) {
    acc->result.passed = acc->result.components > 0 && acc->result.max_rel_error <= options.tolerance;
    results.push_back(acc->result);
  }
  return results;
}

}  // namespace dbpc
