#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dbpc/dbpc.hpp"

namespace dbpc {

/// Central-difference checks of representation_grad and weight_grad against
/// representation_energy and weight_energy on seeded random networks.
struct GradcheckOptions {
  std::uint64_t seed = 20240601;
  std::size_t fc_instances = 50;
  std::size_t conv_instances = 20;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Components whose gradient magnitude is below this are compared on an
  /// absolute scale: error / max(|analytic|, |numeric|, floor).
  double floor = 1e-2;
  /// Negative-control hook: analytic gradients are scaled by (1 + corrupt).
  double corrupt = 0.0;
};

struct SuiteResult {
  std::string name;
  std::size_t instances = 0;
  std::size_t components = 0;
  /// Components skipped because ±step crosses a ReLU kink.
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Suites: representation/fc, weight/fc, representation/conv, weight/conv.
std::vector<SuiteResult> run_gradcheck(const GradcheckOptions& options = {});

/// Random fully-connected network: 3..5 layers of width 2..16.
NetworkParams random_fc_network(std::mt19937_64& rng);
/// Random convolutional network of at most 3 layers with maps up to 6x6,
/// optionally ending in a flatten classifier.
NetworkParams random_conv_network(std::mt19937_64& rng);
/// Non-negative random activities for every layer, nothing clamped.
ActivationState random_state(const NetworkParams& params, std::size_t batch, std::mt19937_64& rng);

}  // namespace dbpc
