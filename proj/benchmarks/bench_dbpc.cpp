#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dbpc/dbpc.hpp"

namespace {

dbpc::Tensor random_inputs(std::size_t batch, std::size_t size, std::uint64_t seed) {
  dbpc::Tensor t({batch, size});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : t.values()) v = u(rng);
  return t;
}

void BM_RepresentationStepFcn(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const dbpc::NetworkParams params(dbpc::preset_architecture("dbpc-fcn-mnist"), rng);
  const auto batch = static_cast<std::size_t>(state.range(0));
  dbpc::ActivationState s = dbpc::clamp_batch(params, random_inputs(batch, 784, 2));
  const dbpc::Hyperparams hp;
  for (auto _ : state) dbpc::representation_step(params, s, hp);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_RepresentationStepFcn)->Arg(8)->Arg(32);

void BM_TrainBatchFcn(benchmark::State& state) {
  std::mt19937_64 rng(1);
  dbpc::NetworkParams params(dbpc::preset_architecture("dbpc-fcn-mnist"), rng);
  const dbpc::Tensor inputs = random_inputs(32, 784, 3);
  std::vector<int> labels(32);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
  dbpc::Hyperparams hp;
  const dbpc::Execution exec{static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1))};
  for (auto _ : state) dbpc::train_batch(params, inputs, labels, hp, exec);
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_TrainBatchFcn)->Args({1, 8})->Args({1, 32})->Args({4, 32})->Unit(benchmark::kMillisecond);

void BM_TrainBatchCnn(benchmark::State& state) {
  std::mt19937_64 rng(1);
  dbpc::NetworkParams params(dbpc::preset_architecture("dbpc-cnn-mnist"), rng);
  const dbpc::Tensor inputs = random_inputs(8, 784, 3);
  std::vector<int> labels(8);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i);
  dbpc::Hyperparams hp;
  hp.iterations = 5;
  for (auto _ : state) dbpc::train_batch(params, inputs, labels, hp);
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_TrainBatchCnn)->Unit(benchmark::kMillisecond);

}  // namespace
