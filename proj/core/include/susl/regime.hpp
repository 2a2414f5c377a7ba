#pragma once

#include <set>

#include "susl/dataset.hpp"

namespace susl {

/// How the training split is divided into labeled data, unlabeled data and
/// the validation set. Classes in `hidden_classes` contribute no labels at
/// all; `n_augmented` extra output slots are reserved for clusters found
/// without labels.
struct RegimeSpec {
  double labeled_fraction = 1.0;
  std::set<int> hidden_classes;
  int n_augmented = 0;
  uint64_t seed = 0;

  void validate(int n_known_classes) const;
  std::set<int> visible_classes(int n_known_classes) const;
};

struct RegimeSplit {
  std::vector<SeriesSample> labeled;     // labels kept
  std::vector<SeriesSample> unlabeled;   // labels stripped
  std::vector<SeriesSample> validation;  // ground truth kept for scoring
};

/// Partition the bundle's training split. A seeded stratified 20% of every
/// class goes to validation; hidden-class remainders go to the unlabeled
/// pool; of each visible class the configured fraction (floor, at least one
/// sample when the fraction is positive) is kept labeled.
RegimeSplit build_regime(const DatasetBundle& bundle, const RegimeSpec& spec);

struct MiniBatch {
  std::vector<int> labeled;    // indices into RegimeSplit::labeled
  std::vector<int> unlabeled;  // indices into RegimeSplit::unlabeled
};

/// One epoch of paired batches: the larger side is shuffled and consumed
/// exactly once in chunks (the final short chunk is kept); the smaller side
/// is resampled with replacement to pair every chunk at equal size. With
/// equal sizes both sides are consumed exactly once. An empty side yields
/// empty halves.
std::vector<MiniBatch> make_batches(int n_labeled, int n_unlabeled, int batch_size, uint64_t seed, int epoch);

}  // namespace susl
