#include <benchmark/benchmark.h>

#include "susl/rng.hpp"
#include "susl/tape.hpp"

using namespace susl;

namespace {

Array random_array(std::vector<int> shape, uint64_t seed) {
  Rng rng(seed);
  Array a(std::move(shape));
  for (int64_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(-1.0, 1.0);
  return a;
}

void MatmulForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Array a = random_array({n, n}, 1);
  const Array b = random_array({n, n}, 2);
  for (auto _ : state) {
    Tape t;
    const auto c = t.matmul(t.leaf(a), t.leaf(b));
    benchmark::DoNotOptimize(t.value(c).data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * static_cast<int64_t>(n) * n * n);
}
BENCHMARK(MatmulForward)->Arg(64)->Arg(128)->Arg(256);

void Conv1dForwardBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const Array x = random_array({batch, 9, 128}, 3);
  const Array w = random_array({32, 9, 5}, 4);
  const Array b = random_array({32}, 5);
  for (auto _ : state) {
    Tape t;
    const auto y = t.conv1d(t.leaf(x), t.leaf(w), t.leaf(b), 2, 2);
    const auto loss = t.mean(t.mul(y, y));
    t.backward(loss);
    benchmark::DoNotOptimize(t.grad(0).data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(Conv1dForwardBackward)->Arg(32)->Arg(128);

void SoftmaxBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Array logits = random_array({n, 64}, 6);
  for (auto _ : state) {
    Tape t;
    const auto y = t.softmax(t.leaf(logits), 1);
    const auto loss = t.mean(t.mul(y, y));
    t.backward(loss);
    benchmark::DoNotOptimize(t.grad(0).data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(SoftmaxBackward)->Arg(256)->Arg(1024);

}  // namespace
