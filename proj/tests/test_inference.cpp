#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dbpc/inference.hpp"
#include "oracles.hpp"

namespace dbpc {
namespace {

Architecture fc_arch(std::vector<std::size_t> sizes) {
  Architecture arch;
  for (std::size_t s : sizes) arch.layers.push_back({LayerKind::fully_connected, s, 0});
  return arch;
}

Tensor identity(std::size_t n) {
  Tensor eye({n, n});
  for (std::size_t i = 0; i < n; ++i) eye.at(i, i) = 1.0;
  return eye;
}

TEST(Argmax, LowestIndexWinsTies) {
  EXPECT_EQ(argmax(std::vector<double>{0.1, 0.7, 0.7, 0.2}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{3.0, 3.0}), 0u);
  EXPECT_EQ(argmax(std::vector<double>{-1.0, 0.0}), 1u);
}

TEST(Classify, FeedforwardEqualsIterativeWithZeroIterations) {
  std::mt19937_64 rng(3);
  NetworkParams params(fc_arch({12, 9, 6, 4}), rng);
  Hyperparams hp;
  hp.iterations = 0;
  for (int k = 0; k < 10; ++k) {
    const Tensor x = oracle::random_tensor({12}, rng, 0.0, 1.0);
    const auto ff = classify(params, x, hp, ClassifyMode::feedforward);
    const auto it = classify(params, x, hp, ClassifyMode::iterative);
    EXPECT_EQ(ff.output_activity, it.output_activity);
    EXPECT_EQ(ff.predicted_class, it.predicted_class);
    EXPECT_EQ(ff.predicted_class, argmax(ff.output_activity.values()));
  }
}

TEST(Classify, FeedforwardIsPure) {
  std::mt19937_64 rng(5);
  NetworkParams params(fc_arch({8, 6, 3}), rng);
  const Tensor x = oracle::random_tensor({8}, rng, 0.0, 1.0);
  const auto first = classify(params, x, Hyperparams{});
  std::vector<ClassificationResult> others(4);
  parallel_for(4, 4, [&](std::size_t k) { others[k] = classify(params, x, Hyperparams{}); });
  for (const auto& r : others) EXPECT_EQ(r.output_activity, first.output_activity);
}

TEST(Classify, ShapeMismatchIsDataError) {
  std::mt19937_64 rng(7);
  NetworkParams params(fc_arch({8, 6, 3}), rng);
  EXPECT_THROW(classify(params, Tensor({7}), Hyperparams{}), DataError);
}

TEST(Classify, MemorisesASmallBatch) {
  std::mt19937_64 rng(11);
  const std::size_t n = 6;
  const Tensor inputs = oracle::random_tensor({n, 16}, rng, 0.0, 1.0);
  const std::vector<int> labels{0, 1, 2, 0, 1, 2};
  NetworkParams params(fc_arch({16, 24, 3}), rng);
  Hyperparams hp;
  hp.lr_w = 0.05;
  for (int pass = 0; pass < 300; ++pass) train_batch(params, inputs, labels, hp);
  for (std::size_t s = 0; s < n; ++s) {
    EXPECT_EQ(classify(params, inputs.rows(s, 1).reshaped({16}), hp).predicted_class,
              static_cast<std::size_t>(labels[s]))
        << "sample " << s;
  }
}

TEST(Reconstruct, IdentityChainGivesReluOfInput) {
  NetworkParams params(fc_arch({5, 5}));
  params.weights(0).values() = identity(5);
  const Tensor x = Tensor::vector({0.3, -0.2, 0.0, 1.0, 0.6});
  ActivationState state = make_state(params, 1);
  state.y[0] = x.reshaped({1, 5});
  state.y[1] = x.reshaped({1, 5});
  const auto result = reconstruct_from_layer(params, state, 1);
  EXPECT_EQ(result.source_layer, 1u);
  EXPECT_EQ(result.image, relu(x));
}

TEST(Reconstruct, RandomNetGivesFiniteNonNegativeInputShapedImages) {
  std::mt19937_64 rng(13);
  Architecture arch = preset_architecture("dbpc-cnn-mnist");
  NetworkParams params(arch, rng);
  const Tensor x = oracle::random_tensor({1, 28, 28}, rng, 0.0, 1.0);
  Hyperparams hp;
  hp.iterations = 2;
  for (std::size_t l : reconstruction_layers(params)) {
    const auto result = reconstruct_from_input(params, x, hp, l);
    EXPECT_EQ(result.image.shape(), (Shape{1, 28, 28}));
    EXPECT_TRUE(result.image.all_finite());
    for (double v : result.image.values()) EXPECT_GE(v, 0.0);
  }
}

TEST(Reconstruct, SourceLayerRange) {
  std::mt19937_64 rng(17);
  NetworkParams params(fc_arch({4, 5, 3}), rng);
  const ActivationState state = make_state(params, 1);
  EXPECT_THROW(reconstruct_from_layer(params, state, 0), std::out_of_range);
  EXPECT_THROW(reconstruct_from_layer(params, state, 3), std::out_of_range);
  EXPECT_NO_THROW(reconstruct_from_layer(params, state, 2));
}

TEST(Reconstruct, SourceLayersPerPreset) {
  auto layers = [](const char* name) {
    return reconstruction_layers(NetworkParams(preset_architecture(name)));
  };
  EXPECT_EQ(layers("dbpc-fcn-mnist"), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(layers("dbpc-cnn-mnist"), (std::vector<std::size_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(layers("dbpc-cnn-fashion"), (std::vector<std::size_t>{1, 2, 3, 4, 5, 6, 7, 8, 9}));
}

ImageDataset one_hot_dataset() {
  ImageDataset data;
  data.name = "onehot";
  data.images = Tensor({10, 1, 1, 10});
  for (std::size_t s = 0; s < 10; ++s) {
    data.images[s * 10 + s] = 1.0;
    data.labels.push_back(static_cast<int>(s));
  }
  return data;
}

TEST(Evaluate, PerfectNetScoresOne) {
  NetworkParams params(fc_arch({10, 10, 10}));
  params.weights(0).values() = identity(10);
  params.weights(1).values() = identity(10);
  const auto report = evaluate(params, one_hot_dataset(), Hyperparams{});
  EXPECT_EQ(report.accuracy, 1.0);
  EXPECT_EQ(report.samples, 10u);
  ASSERT_EQ(report.layers.size(), 1u);
  EXPECT_EQ(report.layers[0].layer, 1u);
  EXPECT_TRUE(std::isinf(report.layers[0].psnr));
  EXPECT_EQ(report.layers[0].ssim, 1.0);
}

TEST(Evaluate, LayerListMatchesSourcesAndLimit) {
  std::mt19937_64 rng(19);
  NetworkParams params(fc_arch({10, 8, 6, 4, 10}), rng);
  EvalOptions options;
  options.reconstruction_limit = 3;
  const auto report = evaluate(params, one_hot_dataset(), Hyperparams{}, options);
  EXPECT_EQ(report.layers.size(), reconstruction_layers(params).size());
  EXPECT_EQ(report.reconstructed, 3u);
  EXPECT_EQ(report.confusion.total(), 10u);
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
  std::mt19937_64 rng(23);
  NetworkParams params(fc_arch({10, 8, 10}), rng);
  EvalOptions options;
  options.mode = ClassifyMode::iterative;
  const auto a = evaluate(params, one_hot_dataset(), Hyperparams{}, options, {1, 3});
  const auto b = evaluate(params, one_hot_dataset(), Hyperparams{}, options, {4, 3});
  EXPECT_EQ(a.accuracy, b.accuracy);
  ASSERT_EQ(a.layers.size(), b.layers.size());
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    EXPECT_EQ(a.layers[k].psnr, b.layers[k].psnr);
    EXPECT_EQ(a.layers[k].ssim, b.layers[k].ssim);
  }
}

TEST(Evaluate, EmptyDatasetIsDataError) {
  NetworkParams params(fc_arch({10, 10}));
  ImageDataset empty;
  empty.images = Tensor({0, 1, 1, 10});
  EXPECT_THROW(evaluate(params, empty, Hyperparams{}), DataError);
}

TEST(Mode, ParseRoundTrip) {
  EXPECT_EQ(parse_classify_mode("feedforward"), ClassifyMode::feedforward);
  EXPECT_EQ(parse_classify_mode(to_string(ClassifyMode::iterative)), ClassifyMode::iterative);
  EXPECT_THROW(parse_classify_mode("both"), std::invalid_argument);
}

}  // namespace
}  // namespace dbpc
