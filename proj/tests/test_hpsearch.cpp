#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "support/fixtures.hpp"
#include "support/synthetic.hpp"
#include "susl/errors.hpp"
#include "susl/hpsearch.hpp"

using namespace susl;
using susl::testing::SyntheticSpec;
using susl::testing::TempDir;

namespace {

// Chi-square 99th percentile at 9 degrees of freedom.
constexpr double kChi2Crit = 21.666;

DatasetBundle tiny_waves() {
  SyntheticSpec spec;
  spec.length = 16;
  spec.train_per_class = 12;
  spec.test_per_class = 4;
  spec.seed = 5;
  return znormalize(susl::testing::make_waveform_bundle(spec));
}

// A shrunken space that keeps unit-test trials fast.
SearchSpace fast_space() {
  SearchSpace s;
  s.augmented_choices = {0, 2};
  s.weight_decay_choices = {0.0, 1e-4};
  s.lr_min = 1e-3;
  s.lr_max = 1e-2;
  s.class_weight_choices = {1.0, 10.0};
  s.latent_choices = {3, 4};
  s.entropy_weight_choices = {1.0};
  s.layer_choices = {1};
  s.filter_choices = {4};
  s.unit_choices = {8, 12};
  s.kernel_choices = {3};
  s.clip_choices = {1.0, 10.0};
  return s;
}

SearchOptions fast_options(int trials, uint64_t seed = 9) {
  SearchOptions o;
  o.n_trials = trials;
  o.epochs = 2;
  o.batch_size = 32;
  o.micro_batch = 32;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("configuration sampling covers the full grid") {
  const SearchSpace space = SearchSpace::defaults();
  Rng rng(2024);
  std::set<int> augmented, kernels, latents, layers, filters, units;
  std::set<double> decays, class_weights, entropy_weights, clips;
  int lr_bins[10] = {0};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const TrialConfig t = sample_config(space, rng, Variant::conv);
    augmented.insert(t.n_augmented);
    kernels.insert(t.model.kernel_size);
    latents.insert(t.model.latent_dim);
    layers.insert(t.model.layers);
    filters.insert(t.model.filters);
    units.insert(t.model.units);
    decays.insert(t.train.weights.weight_decay);
    class_weights.insert(t.train.weights.class_weight);
    entropy_weights.insert(t.train.weights.entropy_weight);
    clips.insert(t.train.weights.grad_clip);
    CHECK(t.train.lr >= 1e-6);
    CHECK(t.train.lr <= 1e-1);
    const int bin = std::min(9, static_cast<int>((std::log10(t.train.lr) + 6.0) / 0.5));
    ++lr_bins[bin];
    CHECK(t.model.variant == Variant::conv);
  }
  CHECK(augmented.size() == 11);  // every multiple of ten appears
  for (int v = 0; v <= 100; v += 10) CHECK(augmented.count(v));
  CHECK(kernels == std::set<int>{3, 5, 7});
  CHECK(latents.size() == 10);
  CHECK(layers == std::set<int>{1, 2, 3});
  CHECK(filters == std::set<int>{32, 64, 128});
  CHECK(units.size() == 7);
  CHECK(decays.size() == 12);
  CHECK(class_weights.size() == 11);
  CHECK(entropy_weights.size() == 11);
  CHECK(clips.size() == 11);

  // log10(lr) should be close to uniform over its ten half-decade bins
  const double expected = draws / 10.0;
  double chi2 = 0.0;
  for (int b = 0; b < 10; ++b) {
    const double d = lr_bins[b] - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < kChi2Crit);
}

TEST_CASE("single-trial search degenerates to one fit") {
  const DatasetBundle bundle = tiny_waves();
  RegimeSpec regime;
  regime.labeled_fraction = 1.0;
  regime.seed = 1;
  const SearchOutcome out = run_search(bundle, regime, fast_space(), Variant::mlp, fast_options(1));
  CHECK(out.ranked.size() == 1);
  CHECK(out.best.index == 0);
  REQUIRE(out.best.test_metrics.has_value());
  CHECK(out.best.test_metrics->accuracy >= 0.0);
}

TEST_CASE("rankings come from validation accuracy and only the winner touches the test split") {
  const DatasetBundle bundle = tiny_waves();
  RegimeSpec regime;
  regime.labeled_fraction = 1.0;
  regime.seed = 1;
  const SearchOutcome out = run_search(bundle, regime, fast_space(), Variant::mlp, fast_options(4));
  REQUIRE(out.ranked.size() == 4);
  for (size_t i = 1; i < out.ranked.size(); ++i)
    CHECK(out.ranked[i - 1].val_accuracy >= out.ranked[i].val_accuracy);
  int with_test = 0;
  for (const auto& r : out.ranked)
    if (r.test_metrics) ++with_test;
  CHECK(with_test == 1);
  CHECK(out.ranked[0].index == out.best.index);
  REQUIRE(out.best.test_metrics.has_value());
}

TEST_CASE("identical searches produce identical rankings") {
  const DatasetBundle bundle = tiny_waves();
  RegimeSpec regime;
  regime.labeled_fraction = 0.5;
  regime.seed = 2;
  const SearchOutcome a = run_search(bundle, regime, fast_space(), Variant::mlp, fast_options(3, 77));
  const SearchOutcome b = run_search(bundle, regime, fast_space(), Variant::mlp, fast_options(3, 77));
  REQUIRE(a.ranked.size() == b.ranked.size());
  for (size_t i = 0; i < a.ranked.size(); ++i) {
    CHECK(a.ranked[i].index == b.ranked[i].index);
    CHECK(a.ranked[i].val_accuracy == b.ranked[i].val_accuracy);
    CHECK(a.ranked[i].seed == b.ranked[i].seed);
  }
}

TEST_CASE("every trial is reproducible from its logged config and seed") {
  const DatasetBundle bundle = tiny_waves();
  RegimeSpec regime;
  regime.labeled_fraction = 1.0;
  regime.seed = 4;
  const SearchOutcome out = run_search(bundle, regime, fast_space(), Variant::mlp, fast_options(2));
  for (const auto& trial : out.ranked) {
    RegimeSpec trial_regime = regime;
    trial_regime.n_augmented = trial.config.n_augmented;
    DatasetBundle train_view = bundle;
    train_view.test.clear();
    const FitResult refit = fit(train_view, trial_regime, trial.config.model, trial.config.train);
    CHECK(std::max(refit.best_val_accuracy, 0.0) == trial.val_accuracy);
  }
}

TEST_CASE("diverging trials are logged and counted, never retried") {
  const DatasetBundle bundle = tiny_waves();
  RegimeSpec regime;
  regime.labeled_fraction = 1.0;
  regime.seed = 3;
  SearchSpace bad = fast_space();
  bad.lr_min = 1e14;
  bad.lr_max = 1e15;
  bad.clip_choices = {1e30};
  CHECK_THROWS_AS(run_search(bundle, regime, bad, Variant::mlp, fast_options(2)), ConfigError);

  // A mixed space: the sane trial wins, the diverged one is ranked last.
  SearchOptions opts = fast_options(5, 21);
  SearchSpace mixed = fast_space();
  mixed.lr_min = 1e-3;
  mixed.lr_max = 1e15;  // log-uniform: some draws diverge
  mixed.clip_choices = {1e30};
  const SearchOutcome out = run_search(bundle, regime, mixed, Variant::mlp, opts);
  CHECK(out.ranked.size() == 5);
  CHECK(out.best.status != TrialStatus::diverged);
  bool any_diverged = false;
  for (const auto& r : out.ranked) any_diverged = any_diverged || r.status == TrialStatus::diverged;
  CHECK(any_diverged);
}

TEST_CASE("the trial log is one json record per line") {
  const DatasetBundle bundle = tiny_waves();
  RegimeSpec regime;
  regime.labeled_fraction = 1.0;
  regime.seed = 1;
  const SearchOutcome out = run_search(bundle, regime, fast_space(), Variant::mlp, fast_options(3));
  TempDir tmp("trials");
  write_search_log(tmp.path() / "trials.jsonl", out.ranked);
  std::ifstream is(tmp.path() / "trials.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ++lines;
    CHECK(line.find("\"trial\"") != std::string::npos);
    CHECK(line.find("\"val_accuracy\"") != std::string::npos);
    CHECK(line.find("\"status\"") != std::string::npos);
    CHECK(line.find("\"seed\"") != std::string::npos);
  }
  CHECK(lines == 3);
}

TEST_CASE("pruning requires a sequential search") {
  const DatasetBundle bundle = tiny_waves();
  RegimeSpec regime;
  regime.labeled_fraction = 1.0;
  SearchOptions opts = fast_options(2);
  opts.prune = true;
  opts.jobs = 2;
  CHECK_THROWS_AS(run_search(bundle, regime, fast_space(), Variant::mlp, opts), ConfigError);
}
