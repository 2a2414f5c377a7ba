#include "susl/hpsearch.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "susl/errors.hpp"

namespace susl {

SearchSpace SearchSpace::defaults() {
  SearchSpace s;
  for (int v = 0; v <= 100; v += 10) s.augmented_choices.push_back(v);
  s.weight_decay_choices.push_back(0.0);
  for (int k = -10; k <= 0; ++k) s.weight_decay_choices.push_back(std::pow(10.0, k));
  for (int k = 0; k <= 10; ++k) s.class_weight_choices.push_back(std::pow(10.0, k));
  for (int v = 10; v <= 100; v += 10) s.latent_choices.push_back(v);
  for (int k = 0; k <= 10; ++k) s.entropy_weight_choices.push_back(std::pow(10.0, k));
  s.layer_choices = {1, 2, 3};
  s.filter_choices = {32, 64, 128};
  for (int v = 32; v <= 2048; v *= 2) s.unit_choices.push_back(v);
  s.kernel_choices = {3, 5, 7};
  for (int k = -10; k <= 0; ++k) s.clip_choices.push_back(std::pow(10.0, k));
  return s;
}

namespace {

template <typename T>
T pick(const std::vector<T>& choices, Rng& rng) {
  if (choices.empty()) throw ConfigError("empty search dimension");
  return choices[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(choices.size()) - 1))];
}

}  // namespace

TrialConfig sample_config(const SearchSpace& space, Rng& rng, Variant variant) {
  TrialConfig t;
  t.n_augmented = pick(space.augmented_choices, rng);
  t.train.weights.weight_decay = pick(space.weight_decay_choices, rng);
  t.train.lr = rng.log_uniform(space.lr_min, space.lr_max);
  t.train.weights.class_weight = pick(space.class_weight_choices, rng);
  t.model.latent_dim = pick(space.latent_choices, rng);
  t.train.weights.entropy_weight = pick(space.entropy_weight_choices, rng);
  t.model.layers = pick(space.layer_choices, rng);
  t.model.filters = pick(space.filter_choices, rng);
  t.model.units = pick(space.unit_choices, rng);
  t.model.kernel_size = pick(space.kernel_choices, rng);
  t.train.weights.grad_clip = pick(space.clip_choices, rng);
  t.model.variant = variant;
  return t;
}

std::string to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::ok: return "ok";
    case TrialStatus::pruned: return "pruned";
    case TrialStatus::diverged: return "diverged";
  }
  return "unknown";
}

namespace {

struct TrialRun {
  TrialResult result;
  Parameters params;
  ModelConfig model;
};

// Median tracker for the pruning rule; sequential searches only.
class PruneState {
 public:
  explicit PruneState(std::vector<int> checkpoints) : checkpoints_(std::move(checkpoints)) {}

  bool should_stop(int epochs_done, double val_accuracy) {
    auto it = std::find(checkpoints_.begin(), checkpoints_.end(), epochs_done);
    if (it == checkpoints_.end()) return false;
    auto& seen = history_[epochs_done];
    bool stop = false;
    if (seen.size() >= 2) {
      std::vector<double> sorted = seen;
      std::sort(sorted.begin(), sorted.end());
      const double median = sorted[sorted.size() / 2];
      stop = val_accuracy < median;
    }
    seen.push_back(val_accuracy);
    return stop;
  }

 private:
  std::vector<int> checkpoints_;
  std::map<int, std::vector<double>> history_;
};

}  // namespace

SearchOutcome run_search(const DatasetBundle& bundle, const RegimeSpec& regime, const SearchSpace& space,
                         Variant variant, const SearchOptions& opts,
                         const std::function<void(const TrialResult&)>& on_trial) {
  if (opts.n_trials < 1) throw ConfigError("n_trials must be >= 1");
  if (opts.jobs < 1) throw ConfigError("jobs must be >= 1");
  if (opts.prune && opts.jobs != 1) throw ConfigError("pruning requires a sequential search (jobs == 1)");

  // Trials never see the held-out split.
  DatasetBundle train_view = bundle;
  train_view.test.clear();

  const Rng root(opts.seed);
  PruneState prune(opts.prune_checkpoints);
  std::vector<TrialRun> runs(static_cast<size_t>(opts.n_trials));
  std::mutex mu;

  auto execute = [&](int index) {
    Rng cfg_rng = root.derive("config", static_cast<uint64_t>(index));
    TrialConfig trial = sample_config(space, cfg_rng, variant);
    trial.train.epochs = opts.epochs;
    trial.train.batch_size = opts.batch_size;
    trial.train.lambda_step = opts.lambda_step;
    trial.train.lambda_max = opts.lambda_max;
    trial.train.micro_batch = opts.micro_batch;
    trial.train.seed = root.derive("trial_seed", static_cast<uint64_t>(index)).next_u64();

    RegimeSpec trial_regime = regime;
    trial_regime.n_augmented = trial.n_augmented;

    TrialRun run;
    run.result.index = index;
    run.result.config = trial;
    run.result.seed = trial.train.seed;

    EpochCallback callback;
    bool pruned = false;
    if (opts.prune)
      callback = [&prune, &pruned](const EpochStats& stats, const Parameters&) {
        if (prune.should_stop(stats.epoch + 1, stats.val_accuracy)) {
          pruned = true;
          return false;
        }
        return true;
      };

    try {
      FitResult fitted = fit(train_view, trial_regime, trial.model, trial.train, callback);
      run.result.val_accuracy = std::max(fitted.best_val_accuracy, 0.0);
      run.result.status = fitted.diverged ? TrialStatus::diverged : (pruned ? TrialStatus::pruned : TrialStatus::ok);
      run.result.diagnostic = fitted.diagnostic;
      run.params = std::move(fitted.best_params);
      run.model = fitted.model;
    } catch (const Error& e) {
      run.result.status = TrialStatus::diverged;
      run.result.diagnostic = e.what();
    }

    std::lock_guard<std::mutex> lock(mu);
    if (on_trial) on_trial(run.result);
    runs[static_cast<size_t>(index)] = std::move(run);
  };

  if (opts.jobs == 1) {
    for (int i = 0; i < opts.n_trials; ++i) execute(i);
  } else {
    std::vector<std::thread> workers;
    std::atomic<int> next{0};
    for (int w = 0; w < std::min(opts.jobs, opts.n_trials); ++w)
      workers.emplace_back([&]() {
        for (int i = next.fetch_add(1); i < opts.n_trials; i = next.fetch_add(1)) execute(i);
      });
    for (auto& worker : workers) worker.join();
  }

  std::vector<int> order(static_cast<size_t>(opts.n_trials));
  for (int i = 0; i < opts.n_trials; ++i) order[static_cast<size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&runs](int a, int b) {
    return runs[static_cast<size_t>(a)].result.val_accuracy > runs[static_cast<size_t>(b)].result.val_accuracy;
  });

  int winner = -1;
  for (int idx : order)
    if (runs[static_cast<size_t>(idx)].result.status != TrialStatus::diverged) {
      winner = idx;
      break;
    }
  if (winner < 0) {
    std::string all;
    for (const auto& r : runs) all += "trial " + std::to_string(r.result.index) + ": " + r.result.diagnostic + "\n";
    throw ConfigError("no trial finished successfully:\n" + all);
  }

  SearchOutcome outcome;
  TrialRun& best = runs[static_cast<size_t>(winner)];
  if (!bundle.test.empty()) {
    const std::set<int> visible = regime.visible_classes(bundle.n_classes());
    const EvalReport report = evaluate(best.params, best.model, bundle.test, visible);
    best.result.test_metrics = Metrics{report.accuracy, report.macro_f1, report.weighted_f1};
  }
  outcome.best = best.result;
  outcome.best_params = std::move(best.params);
  outcome.best_model = best.model;
  for (int idx : order) outcome.ranked.push_back(runs[static_cast<size_t>(idx)].result);
  return outcome;
}

void write_search_log(const std::filesystem::path& path, std::span<const TrialResult> trials) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  for (const auto& t : trials) {
    nlohmann::json j;
    j["trial"] = t.index;
    j["seed"] = t.seed;
    j["status"] = to_string(t.status);
    j["val_accuracy"] = t.val_accuracy;
    j["config"] = {{"augmented", t.config.n_augmented},
                   {"latent_dim", t.config.model.latent_dim},
                   {"layers", t.config.model.layers},
                   {"filters", t.config.model.filters},
                   {"units", t.config.model.units},
                   {"kernel_size", t.config.model.kernel_size},
                   {"variant", to_string(t.config.model.variant)},
                   {"lr", t.config.train.lr},
                   {"class_weight", t.config.train.weights.class_weight},
                   {"entropy_weight", t.config.train.weights.entropy_weight},
                   {"weight_decay", t.config.train.weights.weight_decay},
                   {"grad_clip", t.config.train.weights.grad_clip}};
    if (!t.diagnostic.empty()) j["diagnostic"] = t.diagnostic;
    if (t.test_metrics) {
      j["test"] = {{"accuracy", t.test_metrics->accuracy},
                   {"macro_f1", t.test_metrics->macro_f1},
                   {"weighted_f1", t.test_metrics->weighted_f1}};
    }
    os << j.dump() << "\n";
  }
}

}  // namespace susl
