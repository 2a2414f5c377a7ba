#pragma once

#include <filesystem>
#include <functional>

#include "susl/evaluation.hpp"
#include "susl/objective.hpp"
#include "susl/regime.hpp"

namespace susl {

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 100;
  int batch_size = 512;
  LossWeights weights;  // entropy_anneal is driven by the schedule below
  double lambda_step = 0.1;
  double lambda_max = 1.0;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int micro_batch = 128;  // tape chunk size; bounds memory, not the math

  void validate() const;
};

/// Entropy-regularizer multiplier at a given epoch: min(max, step * epoch).
double lambda_at(int epoch, double step = 0.1, double max_value = 1.0);

/// Cosine-annealed learning rate at optimizer step s of S.
double cosine_lr(int64_t step, int64_t total_steps, double lr0);

struct AdamState {
  std::vector<Array> m, v;
  int64_t t = 0;
};
AdamState init_adam(const Parameters& params);

/// One optimizer step: gradients are globally clipped to the configured
/// norm, then Adam with bias correction is applied; decoupled weight decay
/// hits every non-prior tensor. Raises DivergenceError on non-finite
/// gradients before touching any state.
void adam_step(Parameters& params, AdamState& state, const std::vector<Array>& grads, double lr,
               const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  LossBreakdown loss;
  double lambda = 0.0;
  double lr = 0.0;
  double val_accuracy = 0.0;
};

struct FitResult {
  Parameters best_params;
  ModelConfig model;
  std::vector<EpochStats> history;
  double best_val_accuracy = -1.0;
  int best_epoch = -1;
  bool diverged = false;
  std::string diagnostic;
};

/// Return false to stop after the current epoch (used by search pruning).
using EpochCallback = std::function<bool(const EpochStats&, const Parameters&)>;

/// Full optimization loop over the bundle's training split. The model's
/// input size, known classes and augmented slots are resolved from the
/// bundle and the regime. The checkpoint kept is the last epoch reaching
/// the best validation accuracy. Only the training split is touched.
FitResult fit(const DatasetBundle& bundle, const RegimeSpec& regime, ModelConfig model, const TrainConfig& train,
              const EpochCallback& on_epoch = {});

void write_history_csv(const std::filesystem::path& path, std::span<const EpochStats> history);

}  // namespace susl
