#include <benchmark/benchmark.h>

#include <random>

#include "dbpc/tensor.hpp"

namespace {

dbpc::Tensor random_tensor(dbpc::Shape shape, std::uint64_t seed) {
  dbpc::Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : t.values()) v = u(rng);
  return t;
}

void BM_MatmulBatch(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const dbpc::Tensor w = random_tensor({1000, 784}, 1);
  const dbpc::Tensor x = random_tensor({batch, 784}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(dbpc::matmul_batch(w, x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_MatmulBatch)->Arg(1)->Arg(8)->Arg(32);

void BM_MatmulTransposeBatch(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const dbpc::Tensor w = random_tensor({1000, 784}, 1);
  const dbpc::Tensor v = random_tensor({batch, 1000}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(dbpc::matmul_transpose_batch(w, v));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_MatmulTransposeBatch)->Arg(1)->Arg(8)->Arg(32);

void BM_Conv2dSameBatch(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  const dbpc::ConvKernel k(random_tensor({channels, channels, 3, 3}, 4));
  const dbpc::Tensor x = random_tensor({8, channels, 28, 28}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(dbpc::conv2d_same_batch(x, k));
}
BENCHMARK(BM_Conv2dSameBatch)->Arg(16)->Arg(48);

void BM_Conv2dAdjointSameBatch(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  const dbpc::ConvKernel k(random_tensor({channels, channels, 3, 3}, 4));
  const dbpc::Tensor x = random_tensor({8, channels, 28, 28}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(dbpc::conv2d_adjoint_same_batch(x, k));
}
BENCHMARK(BM_Conv2dAdjointSameBatch)->Arg(16)->Arg(48);

void BM_KernelGrad(benchmark::State& state) {
  const dbpc::Tensor out = random_tensor({8, 32, 28, 28}, 6);
  const dbpc::Tensor in = random_tensor({8, 32, 28, 28}, 7);
  dbpc::Tensor grad({32, 32, 3, 3});
  for (auto _ : state) {
    dbpc::accumulate_kernel_grad(grad, out, in, 1.0);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_KernelGrad);

}  // namespace
