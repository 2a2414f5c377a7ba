#include <benchmark/benchmark.h>

#include "susl/objective.hpp"
#include "susl/rng.hpp"
#include "susl/trainer.hpp"

using namespace susl;

namespace {

ModelConfig bench_model(int n_augmented) {
  ModelConfig m;
  m.variant = Variant::conv;
  m.channels = 1;
  m.length = 64;
  m.n_known_classes = 4;
  m.n_augmented_classes = n_augmented;
  m.latent_dim = 8;
  m.layers = 2;
  m.filters = 16;
  m.kernel_size = 5;
  return m;
}

UnlabeledBatch random_unlabeled(const ModelConfig& cfg, int n, uint64_t seed) {
  Rng rng(seed);
  UnlabeledBatch b;
  b.x = Array({n, cfg.channels, cfg.length});
  for (int64_t i = 0; i < b.x.size(); ++i) b.x[i] = rng.uniform(-1.5, 1.5);
  b.noise = Array({n, cfg.latent_dim});
  for (int64_t i = 0; i < b.noise.size(); ++i) b.noise[i] = rng.normal();
  return b;
}

// One gradient step of the marginalized objective: the dominant cost of a
// label-free epoch, scaling with the number of class slots.
void MarginalStep(benchmark::State& state) {
  const ModelConfig cfg = bench_model(static_cast<int>(state.range(0)) - 4);
  Parameters params = init_parameters(cfg, 1);
  AdamState adam = init_adam(params);
  TrainConfig train;
  train.weights.grad_clip = 100.0;
  const UnlabeledBatch batch = random_unlabeled(cfg, 128, 2);
  LossWeights w;
  w.entropy_weight = 10.0;

  for (auto _ : state) {
    Tape t;
    const ParamNodes pn = stage_parameters(t, params);
    const ObjectiveNodes nodes = build_objective(t, pn, cfg, nullptr, &batch, w);
    t.backward(nodes.objective);
    const auto ids = pn.all();
    std::vector<Array> grads;
    grads.reserve(ids.size());
    for (const auto id : ids) grads.push_back(t.grad(id));
    adam_step(params, adam, grads, 1e-3, train);
    benchmark::DoNotOptimize(params.cls_w.data());
  }
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(MarginalStep)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void ClassifyThroughput(benchmark::State& state) {
  const ModelConfig cfg = bench_model(0);
  const Parameters params = init_parameters(cfg, 1);
  Rng rng(3);
  Array x({256, cfg.channels, cfg.length});
  for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.5, 1.5);
  for (auto _ : state) {
    const Array probs = classify_batch(params, cfg, x);
    benchmark::DoNotOptimize(probs.data());
  }
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(ClassifyThroughput)->Unit(benchmark::kMillisecond);

}  // namespace
