#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dbpc/data.hpp"
#include "dbpc/dbpc.hpp"
#include "dbpc/gradcheck.hpp"
#include "dbpc/inference.hpp"
#include "oracles.hpp"

namespace dbpc {
namespace {

Architecture fc_arch(std::vector<std::size_t> sizes) {
  Architecture arch;
  for (std::size_t s : sizes) arch.layers.push_back({LayerKind::fully_connected, s, 0});
  return arch;
}

ActivationState random_fc_state(const NetworkParams& params, std::size_t batch, std::mt19937_64& rng) {
  ActivationState state = make_state(params, batch);
  for (auto& y : state.y) y = oracle::random_tensor(y.shape(), rng, 0.0, 1.0);
  return state;
}

Tensor sample_row(const Tensor& batch, std::size_t b) {
  const std::size_t n = batch.size() / batch.dim(0);
  return batch.rows(b, 1).reshaped({n});
}

double naive_residual_power(const Tensor& w, const Tensor& y_lo, const Tensor& y_hi, bool feedforward) {
  const Tensor pre = feedforward ? oracle::naive_matvec(w, y_lo) : oracle::naive_matvec(oracle::transpose(w), y_hi);
  const Tensor& target = feedforward ? y_hi : y_lo;
  double sum = 0.0;
  for (std::size_t k = 0; k < pre.size(); ++k) {
    const double r = target[k] - std::max(pre[k], 0.0);
    sum += r * r;
  }
  return sum;
}

// Σ over samples of the per-interface ff and fb residual powers.
std::pair<double, double> naive_interface_power(const NetworkParams& params, const ActivationState& state,
                                                std::size_t i) {
  double ff = 0.0, fb = 0.0;
  for (std::size_t b = 0; b < state.batch_size(); ++b) {
    const Tensor lo = sample_row(state.y[i], b);
    const Tensor hi = sample_row(state.y[i + 1], b);
    ff += naive_residual_power(params.weights(i).values(), lo, hi, true);
    fb += naive_residual_power(params.weights(i).values(), lo, hi, false);
  }
  return {ff, fb};
}

// Weights chosen so that every prediction is exact: W = I on a 3-3-3 net
// with equal non-negative activities everywhere.
std::pair<NetworkParams, ActivationState> consistent_net() {
  NetworkParams params(fc_arch({3, 3, 3}));
  for (std::size_t i = 0; i < 2; ++i) params.weights(i).values() = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  ActivationState state = make_state(params, 1);
  for (auto& y : state.y) y = Tensor({1, 3}, {0.2, 0.5, 0.9});
  return {params, state};
}

Tensor gather_rows(const Tensor& batch, const std::vector<std::size_t>& rows) {
  Tensor out({rows.size(), batch.dim(1)});
  for (std::size_t k = 0; k < rows.size(); ++k) out.set_rows(k, batch.rows(rows[k], 1));
  return out;
}

std::vector<int> gather(const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  for (std::size_t r : rows) out.push_back(labels[r]);
  return out;
}

Hyperparams factors(double lf, double lb, double bc, double br) {
  Hyperparams hp;
  hp.lambda_f = lf;
  hp.lambda_b = lb;
  hp.beta_c = bc;
  hp.beta_r = br;
  return hp;
}

TEST(Predictions, ExactPredictionGivesZeroError) {
  auto [params, state] = consistent_net();
  const auto errors = prediction_errors(params, state);
  for (const auto& e : errors.feedforward) EXPECT_EQ(squared_norm(e), 0.0);
  for (const auto& e : errors.feedback) EXPECT_EQ(squared_norm(e), 0.0);
}

TEST(Predictions, SquaredResidualDefinition) {
  // y_1 = (1, 2); the prediction from W = diag(0, 2) applied to y_0 = (1, 2) is (0, 4).
  NetworkParams params(fc_arch({2, 2}));
  params.weights(0).values() = Tensor::matrix({{0, 0}, {0, 2}});
  ActivationState state = make_state(params, 1);
  state.y[0] = Tensor({1, 2}, {1, 2});
  state.y[1] = Tensor({1, 2}, {1, 2});
  EXPECT_EQ(feedforward_predict(params, state, 1), Tensor({1, 2}, {0, 4}));
  EXPECT_EQ(prediction_errors(params, state).feedforward[0], Tensor({1, 2}, {1, 4}));
}

TEST(Predictions, MatchIndependentLoop) {
  std::mt19937_64 rng(31);
  NetworkParams params(fc_arch({5, 7, 4}), rng);
  const ActivationState state = random_fc_state(params, 3, rng);
  const auto errors = prediction_errors(params, state);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto [ff, fb] = naive_interface_power(params, state, i);
    double sum_ff = 0.0, sum_fb = 0.0;
    for (double v : errors.feedforward[i].values()) sum_ff += v;
    for (double v : errors.feedback[i].values()) sum_fb += v;
    EXPECT_NEAR(sum_ff, ff, 1e-12 * (1 + ff));
    EXPECT_NEAR(sum_fb, fb, 1e-12 * (1 + fb));
  }
}

TEST(Predictions, LayerRangeChecked) {
  std::mt19937_64 rng(1);
  NetworkParams params(fc_arch({3, 3, 3}), rng);
  const ActivationState state = make_state(params, 1);
  EXPECT_THROW(feedforward_predict(params, state, 0), std::out_of_range);
  EXPECT_THROW(feedback_predict(params, state, 2), std::out_of_range);
}

TEST(RepresentationEnergy, ZeroForConsistentStateAndZeroFactors) {
  auto [params, state] = consistent_net();
  const Hyperparams hp;
  for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(representation_energy(params, state, hp, l), 0.0);

  std::mt19937_64 rng(2);
  NetworkParams random(fc_arch({4, 6, 3}), rng);
  const ActivationState noisy = random_fc_state(random, 2, rng);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_EQ(representation_energy(random, noisy, factors(0, 0, 1, 1), l), 0.0);
  }
}

TEST(RepresentationEnergy, MatchesNaiveRecomputation) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    NetworkParams params(fc_arch({6, 5, 7, 3}), rng);
    const ActivationState state = random_fc_state(params, 2, rng);
    const Hyperparams hp = factors(0.7, 1.3, 1, 1);
    std::vector<std::pair<double, double>> power;
    for (std::size_t i = 0; i < 3; ++i) power.push_back(naive_interface_power(params, state, i));
    for (std::size_t l = 0; l < 4; ++l) {
      double expected = 0.0;
      if (l >= 1) expected += hp.lambda_f * power[l - 1].first + hp.lambda_b * power[l - 1].second;
      if (l < 3) expected += hp.lambda_f * power[l].first + hp.lambda_b * power[l].second;
      EXPECT_NEAR(representation_energy(params, state, hp, l), expected, 1e-12 * (1 + expected));
    }
  }
}

TEST(RepresentationGrad, ZeroForConsistentState) {
  auto [params, state] = consistent_net();
  EXPECT_EQ(squared_norm(representation_grad(params, state, Hyperparams{}, 1)), 0.0);
}

TEST(RepresentationGrad, ClampedLayerIsACallerError) {
  std::mt19937_64 rng(3);
  NetworkParams params(fc_arch({3, 3, 3}), rng);
  ActivationState state = random_fc_state(params, 1, rng);
  state.clamped[0] = true;
  EXPECT_THROW(representation_grad(params, state, Hyperparams{}, 0), std::logic_error);
}

TEST(RepresentationGrad, FiniteDifferencesOnThreeLayerNets) {
  std::mt19937_64 rng(41);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    NetworkParams params(fc_arch({1 + rng() % 8, 1 + rng() % 8, 1 + rng() % 8}), rng);
    ActivationState state = random_fc_state(params, 1, rng);
    const Hyperparams hp = factors(0.5 + trial * 0.05, 1.5 - trial * 0.05, 1, 1);
    for (std::size_t l = 0; l < 3; ++l) {
      const Tensor g = representation_grad(params, state, hp, l);
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double saved = state.y[l][k];
        state.y[l][k] = saved + h;
        const double up = representation_energy(params, state, hp, l);
        state.y[l][k] = saved - h;
        const double down = representation_energy(params, state, hp, l);
        state.y[l][k] = saved;
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(g[k] - numeric) / std::max({std::abs(g[k]), std::abs(numeric), 1.0}));
      }
    }
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(RepresentationGrad, FeedbackFactorZeroLeavesFeedforwardChains) {
  std::mt19937_64 rng(43);
  NetworkParams params(fc_arch({4, 5, 3}), rng);
  const ActivationState state = random_fc_state(params, 2, rng);
  const Tensor full = representation_grad(params, state, factors(1, 1, 1, 1), 1);
  const Tensor ff = representation_grad(params, state, factors(1, 0, 1, 1), 1);
  const Tensor fb = representation_grad(params, state, factors(0, 1, 1, 1), 1);
  for (std::size_t k = 0; k < full.size(); ++k) EXPECT_NEAR(full[k], ff[k] + fb[k], 1e-12);

  // With λ_b = 0 the gradient is 2 r_ff(1) - 2 W_1ᵀ (relu'(W_1 y_1) ⊙ r_ff(2)).
  const auto terms = interface_terms(params, state);
  Tensor expected = terms[0].residual_ff;
  expected *= 2.0;
  Tensor gated = terms[1].residual_ff;
  for (std::size_t k = 0; k < gated.size(); ++k) gated[k] = terms[1].pre_ff[k] > 0 ? gated[k] : 0.0;
  expected.add_scaled(params.adjoint(1, gated), -2.0);
  for (std::size_t k = 0; k < ff.size(); ++k) EXPECT_NEAR(ff[k], expected[k], 1e-12);
}

TEST(RepresentationStep, ZeroRateAndConsistentStateLeaveStateUnchanged) {
  std::mt19937_64 rng(47);
  NetworkParams params(fc_arch({4, 6, 3}), rng);
  ActivationState state = random_fc_state(params, 2, rng);
  const ActivationState before = state;
  Hyperparams hp;
  hp.lr_y = 0.0;
  representation_step(params, state, hp);
  EXPECT_EQ(state.y, before.y);

  auto [cparams, cstate] = consistent_net();
  const ActivationState cbefore = cstate;
  representation_step(cparams, cstate, Hyperparams{});
  EXPECT_EQ(cstate.y, cbefore.y);
}

TEST(RepresentationStep, SmallStepLowersGlobalEnergy) {
  std::mt19937_64 rng(53);
  int lowered = 0;
  for (int trial = 0; trial < 100; ++trial) {
    NetworkParams params(fc_arch({5, 6, 4, 3}), rng);
    ActivationState state = random_fc_state(params, 1, rng);
    state.clamped[0] = true;
    Hyperparams hp;
    hp.lr_y = 1e-3;
    const double before = global_energy(params, state, hp);
    representation_step(params, state, hp);
    if (global_energy(params, state, hp) <= before) ++lowered;
  }
  EXPECT_GE(lowered, 99);
}

TEST(RepresentationStep, ClampedLayersAreBitIdentical) {
  std::mt19937_64 rng(59);
  NetworkParams params(fc_arch({5, 6, 4, 3}), rng);
  ActivationState state = random_fc_state(params, 3, rng);
  state.clamped[0] = true;
  state.clamped[3] = true;
  const Tensor input = state.y[0];
  const Tensor top = state.y[3];
  Hyperparams hp;
  hp.iterations = 50;
  infer_representations(params, state, hp);
  EXPECT_EQ(state.y[0], input);
  EXPECT_EQ(state.y[3], top);
}

TEST(RepresentationStep, LayerOrderDoesNotMatter) {
  std::mt19937_64 rng(61);
  NetworkParams params(fc_arch({5, 6, 4, 7, 3}), rng);
  ActivationState state = random_fc_state(params, 2, rng);
  state.clamped[0] = true;
  const Hyperparams hp;

  ActivationState reference = state;
  representation_step(params, reference, hp);

  // Reverse order, gradients read from the untouched pre-step state.
  ActivationState reversed = state;
  std::vector<Tensor> grads(5);
  for (std::size_t l = 4; l >= 1; --l) grads[l] = representation_grad(params, state, hp, l);
  for (std::size_t l = 4; l >= 1; --l) reversed.y[l].add_scaled(grads[l], -hp.lr_y);
  EXPECT_EQ(reversed.y, reference.y);

  // Concurrently.
  ActivationState concurrent = state;
  std::vector<Tensor> par(5);
  parallel_for(4, 4, [&](std::size_t k) { par[k + 1] = representation_grad(params, state, hp, k + 1); });
  for (std::size_t l = 1; l < 5; ++l) concurrent.y[l].add_scaled(par[l], -hp.lr_y);
  EXPECT_EQ(concurrent.y, reference.y);
}

TEST(Inference, ZeroIterationsLeaveStateUnchanged) {
  std::mt19937_64 rng(67);
  NetworkParams params(fc_arch({4, 6, 3}), rng);
  ActivationState state = random_fc_state(params, 2, rng);
  const ActivationState before = state;
  Hyperparams hp;
  hp.iterations = 0;
  std::vector<double> trace;
  infer_representations(params, state, hp, &trace);
  EXPECT_EQ(state.y, before.y);
  EXPECT_EQ(trace.size(), 1u);
}

TEST(Inference, EnergyTraceNonIncreasing) {
  std::mt19937_64 rng(71);
  NetworkParams params(fc_arch({8, 12, 10, 4}), rng);
  ActivationState state = clamp_batch(params, oracle::random_tensor({2, 8}, rng, 0.0, 1.0));
  Hyperparams hp;
  hp.lr_y = 1e-3;
  hp.iterations = 20;
  std::vector<double> trace;
  infer_representations(params, state, hp, &trace);
  ASSERT_EQ(trace.size(), 21u);
  for (std::size_t k = 1; k < trace.size(); ++k) EXPECT_LE(trace[k], trace[k - 1]);
}

TEST(WeightEnergy, ConsistentStateAndFactorSelection) {
  auto [params, state] = consistent_net();
  EXPECT_EQ(weight_energy(params, state, Hyperparams{}, 0), 0.0);
  EXPECT_EQ(squared_norm(weight_grad(params, state, Hyperparams{}, 1)), 0.0);

  std::mt19937_64 rng(73);
  NetworkParams random(fc_arch({4, 6, 3}), rng);
  const ActivationState noisy = random_fc_state(random, 2, rng);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto [ff, fb] = naive_interface_power(random, noisy, i);
    EXPECT_NEAR(weight_energy(random, noisy, factors(1, 1, 1, 0), i), ff, 1e-12 * (1 + ff));
    EXPECT_NEAR(weight_energy(random, noisy, factors(1, 1, 0.4, 2.5), i), 0.4 * ff + 2.5 * fb,
                1e-12 * (1 + ff + fb));
    EXPECT_EQ(squared_norm(weight_grad(random, noisy, factors(1, 1, 0, 0), i)), 0.0);
  }
}

TEST(WeightGrad, FiniteDifferencesOnFcNets) {
  std::mt19937_64 rng(79);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    NetworkParams params(fc_arch({1 + rng() % 6, 1 + rng() % 6, 1 + rng() % 6}), rng);
    const ActivationState state = random_fc_state(params, 2, rng);
    const Hyperparams hp = factors(1, 1, 0.5 + 0.1 * trial, 1.5 - 0.1 * trial);
    for (std::size_t i = 0; i < 2; ++i) {
      const Tensor g = weight_grad(params, state, hp, i);
      Tensor& w = params.weights(i).values();
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double saved = w[k];
        w[k] = saved + h;
        const double up = weight_energy(params, state, hp, i);
        w[k] = saved - h;
        const double down = weight_energy(params, state, hp, i);
        w[k] = saved;
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(g[k] - numeric) / std::max({std::abs(g[k]), std::abs(numeric), 1.0}));
      }
    }
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(WeightStep, ZeroRateAndConsistentStateLeaveWeightsUnchanged) {
  std::mt19937_64 rng(83);
  NetworkParams params(fc_arch({4, 6, 3}), rng);
  const NetworkParams before = params;
  const ActivationState state = random_fc_state(params, 2, rng);
  Hyperparams hp;
  hp.lr_w = 0.0;
  weight_step(params, state, hp);
  EXPECT_TRUE(params == before);

  auto [cparams, cstate] = consistent_net();
  const NetworkParams cbefore = cparams;
  weight_step(cparams, cstate, Hyperparams{});
  EXPECT_TRUE(cparams == cbefore);
}

TEST(WeightStep, SingleSampleStepLowersWeightEnergy) {
  std::mt19937_64 rng(89);
  for (int trial = 0; trial < 20; ++trial) {
    NetworkParams params(fc_arch({5, 7, 4}), rng);
    const ActivationState state = random_fc_state(params, 1, rng);
    Hyperparams hp;
    hp.lr_w = 1e-4;
    auto total = [&] { return weight_energy(params, state, hp, 0) + weight_energy(params, state, hp, 1); };
    const double before = total();
    weight_step(params, state, hp);
    EXPECT_LT(total(), before);
  }
}

TEST(TrainBatch, ConvergedSampleBarelyMovesWeights) {
  auto [params, state] = consistent_net();
  // Label the consistent sample with its own top activity pattern: a 3-class
  // net whose top layer is exactly one-hot.
  for (auto& y : state.y) y = Tensor({1, 3}, {0, 0, 1});
  const NetworkParams before = params;
  const std::vector<int> labels{2};
  train_batch(params, state.y[0], labels, Hyperparams{});
  for (std::size_t i = 0; i < 2; ++i) {
    Tensor diff = params.weights(i).values() - before.weights(i).values();
    EXPECT_LE(squared_norm(diff), 1e-20);
  }
}

TEST(TrainBatch, RepeatedRunsAreDeterministic) {
  std::mt19937_64 rng(97);
  const Tensor inputs = oracle::random_tensor({20, 6}, rng, 0.0, 1.0);
  std::vector<int> labels;
  for (int k = 0; k < 20; ++k) labels.push_back(k % 3);
  auto run = [&](std::size_t threads) {
    std::mt19937_64 init(5);
    NetworkParams params(fc_arch({6, 8, 3}), init);
    for (int pass = 0; pass < 3; ++pass) train_batch(params, inputs, labels, Hyperparams{}, {threads, 4});
    return params;
  };
  const NetworkParams a = run(1);
  EXPECT_TRUE(a == run(1));
  EXPECT_TRUE(a == run(3));
}

TEST(TrainBatch, LabelOutOfRangeIsDataError) {
  std::mt19937_64 rng(101);
  NetworkParams params(fc_arch({4, 5, 3}), rng);
  const Tensor inputs({2, 4}, 0.5);
  const std::vector<int> bad{0, 3};
  EXPECT_THROW(train_batch(params, inputs, bad, Hyperparams{}), DataError);
  const std::vector<int> negative{-1, 0};
  EXPECT_THROW(train_batch(params, inputs, negative, Hyperparams{}), DataError);
}

TEST(TrainBatch, SeparatesTwoBlobs) {
  std::mt19937_64 rng(103);
  std::normal_distribution<double> noise(0.0, 0.1);
  const std::size_t n = 64;
  Tensor inputs({n, 4});
  std::vector<int> labels(n);
  for (std::size_t s = 0; s < n; ++s) {
    labels[s] = static_cast<int>(s % 2);
    const double centre[2][4] = {{0.9, 0.1, 0.8, 0.2}, {0.1, 0.9, 0.2, 0.8}};
    for (std::size_t k = 0; k < 4; ++k) inputs.at(s, k) = std::max(0.0, centre[s % 2][k] + noise(rng));
  }
  std::mt19937_64 init(7);
  NetworkParams params(fc_arch({4, 8, 2}), init);
  Hyperparams hp;
  hp.lr_w = 0.05;
  for (int step = 0; step < 200; ++step) {
    const auto batch = minibatches(n, 8, static_cast<std::uint64_t>(step / 8))[static_cast<std::size_t>(step % 8)];
    train_batch(params, gather_rows(inputs, batch), gather(labels, batch), hp);
  }
  std::size_t correct = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const auto result = classify(params, inputs.rows(s, 1).reshaped({4}), hp);
    correct += result.predicted_class == static_cast<std::size_t>(labels[s]) ? 1 : 0;
  }
  EXPECT_EQ(correct, n);
}

TEST(ParamCount, PresetArchitectures) {
  EXPECT_EQ(param_count(preset_architecture("dbpc-fcn-mnist")), 1'225'000u);
  EXPECT_EQ(param_count(preset_architecture("dbpc-cnn-mnist")), 424'848u);
  EXPECT_EQ(param_count(preset_architecture("dbpc-cnn-fashion")), 1'003'920u);
  std::mt19937_64 rng(1);
  EXPECT_EQ(param_count(NetworkParams(preset_architecture("dbpc-fcn-mnist"), rng)), 1'225'000u);
}

TEST(ParamCount, ArithmeticOracle) {
  // Σ n_l n_{l+1} for FC, Σ C_l C_{l+1} K² for conv, C_last H W N_C for the head.
  EXPECT_EQ(param_count(fc_arch({784, 1000, 400, 100, 10})),
            784u * 1000 + 1000u * 400 + 400u * 100 + 100u * 10);
  Architecture cnn = preset_architecture("dbpc-cnn-mnist");
  std::size_t expected = 0;
  for (std::size_t l = 1; l < cnn.layers.size(); ++l) {
    const auto& prev = cnn.layers[l - 1];
    const auto& cur = cnn.layers[l];
    if (cur.kind == LayerKind::convolutional) expected += prev.size * cur.size * cur.kernel * cur.kernel;
    if (cur.kind == LayerKind::flatten_to_classifier) expected += prev.size * cnn.height * cnn.width * cur.size;
  }
  EXPECT_EQ(param_count(cnn), expected);
}

TEST(Gradcheck, DefaultSuitesPass) {
  for (const auto& suite : run_gradcheck()) {
    EXPECT_TRUE(suite.passed) << suite.name << " max rel error " << suite.max_rel_error;
    EXPECT_GT(suite.components, 0u) << suite.name;
  }
}

TEST(Gradcheck, CorruptedGradientFails) {
  GradcheckOptions options;
  options.corrupt = 0.01;
  options.fc_instances = 5;
  options.conv_instances = 3;
  for (const auto& suite : run_gradcheck(options)) EXPECT_FALSE(suite.passed) << suite.name;
}

}  // namespace
}  // namespace dbpc
