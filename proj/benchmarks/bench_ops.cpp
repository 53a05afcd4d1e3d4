#include <benchmark/benchmark.h>

#include <random>

#include "mdeeg/autodiff/ops.hpp"
#include "mdeeg/model.hpp"

namespace {

using namespace mdeeg;
using ad::Tensor;

Tensor random_tensor(ad::Shape shape, std::uint64_t seed, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  Tensor t(std::move(shape), 0.0f, grad);
  for (float& v : t.data()) v = n(rng);
  return t;
}

void BM_Conv1dForward(benchmark::State& state) {
  const auto cin = static_cast<std::size_t>(state.range(0));
  const auto cout = static_cast<std::size_t>(state.range(1));
  Tensor x = random_tensor({32, cin, 2560}, 1);
  Tensor k = random_tensor({cout, cin, 32}, 2);
  for (auto _ : state) {
    ad::Graph g(false);
    benchmark::DoNotOptimize(ad::conv1d(g, x, k).data().data());
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Conv1dForward)->Args({4, 8})->Args({8, 8})->Args({4, 64})->Unit(benchmark::kMillisecond);

void BM_Conv1dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  Tensor x = random_tensor({32, c, 2560}, 1, true);
  Tensor k = random_tensor({c, c, 32}, 2, true);
  for (auto _ : state) {
    ad::Graph g;
    Tensor y = ad::sum(g, ad::conv1d(g, x, k));
    g.backward(y);
    benchmark::DoNotOptimize(k.grad().data());
  }
}
BENCHMARK(BM_Conv1dBackward)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  Tensor x = random_tensor({32, 15, 32, 32}, 3);
  Tensor k = random_tensor({c, 15, 3, 3}, 4);
  for (auto _ : state) {
    ad::Graph g(false);
    benchmark::DoNotOptimize(ad::conv2d_same(g, x, k).data().data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  auto cfg = state.range(0) ? model::ModelConfig::full() : model::ModelConfig::desk();
  model::Model m(cfg, 0);
  const std::size_t n = 32;
  Tensor raw = random_tensor({n, 4, 2560}, 5);
  Tensor topo = random_tensor({n, 15, 32, 32}, 6);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  for (auto _ : state) {
    ad::Graph g;
    auto out = m.forward(g, raw, topo, ad::Mode::Train, 7);
    Tensor ce = ad::softmax_cross_entropy(g, out.logits, labels);
    Tensor loss = ad::add(g, ce, ad::scale(g, model::orthogonality_loss(g, out.fused, labels).loss, 0.4));
    g.backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainStep)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace
