#pragma once

#include <optional>

#include "susl/rng.hpp"
#include "susl/trainer.hpp"

namespace susl {

/// Per-parameter sampling supports. Defaults cover the full search grid:
/// discrete choices are drawn uniformly, the learning rate log-uniformly.
struct SearchSpace {
  std::vector<int> augmented_choices;      // {0, 10, ..., 100}
  std::vector<double> weight_decay_choices;  // {0} and 1e-10 .. 1e0
  double lr_min = 1e-6, lr_max = 1e-1;
  std::vector<double> class_weight_choices;    // 1e0 .. 1e10
  std::vector<int> latent_choices;             // {10, 20, ..., 100}
  std::vector<double> entropy_weight_choices;  // 1e0 .. 1e10
  std::vector<int> layer_choices;              // {1, 2, 3}
  std::vector<int> filter_choices;             // {32, 64, 128}
  std::vector<int> unit_choices;               // {32, 64, ..., 2048}
  std::vector<int> kernel_choices;             // {3, 5, 7}
  std::vector<double> clip_choices;            // 1e-10 .. 1e0

  static SearchSpace defaults();
};

struct TrialConfig {
  ModelConfig model;
  TrainConfig train;
  int n_augmented = 0;
};

/// One independent draw from every dimension of the space.
TrialConfig sample_config(const SearchSpace& space, Rng& rng, Variant variant);

enum class TrialStatus { ok, pruned, diverged };
std::string to_string(TrialStatus s);

struct TrialResult {
  int index = -1;
  TrialConfig config;
  uint64_t seed = 0;
  double val_accuracy = 0.0;
  TrialStatus status = TrialStatus::ok;
  std::string diagnostic;
  std::optional<Metrics> test_metrics;  // winner only
};

struct SearchOptions {
  int n_trials = 60;
  int epochs = 100;
  int batch_size = 512;
  double lambda_step = 0.1;
  double lambda_max = 1.0;
  int micro_batch = 128;
  uint64_t seed = 0;
  int jobs = 1;
  bool prune = false;                            // sequential runs only
  std::vector<int> prune_checkpoints = {10, 25, 50};  // epochs completed
};

struct SearchOutcome {
  std::vector<TrialResult> ranked;  // by validation accuracy, best first
  TrialResult best;                 // carries the only test metrics computed
  Parameters best_params;
  ModelConfig best_model;
};

/// Random search over the space. Trials see only the training split; the
/// test split is evaluated exactly once, for the winning trial. Rankings
/// are by validation accuracy alone. With `prune` set, a trial whose
/// validation accuracy falls below the median of earlier trials at a
/// checkpoint epoch is stopped early.
SearchOutcome run_search(const DatasetBundle& bundle, const RegimeSpec& regime, const SearchSpace& space,
                         Variant variant, const SearchOptions& opts,
                         const std::function<void(const TrialResult&)>& on_trial = {});

/// One machine-readable record per trial (config, seed, accuracy, status).
void write_search_log(const std::filesystem::path& path, std::span<const TrialResult> trials);

}  // namespace susl
