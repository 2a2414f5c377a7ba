#include "susl/regime.hpp"

#include <algorithm>
#include <cmath>

#include "susl/errors.hpp"
#include "susl/rng.hpp"

namespace susl {

namespace {

constexpr double kValidationFraction = 0.2;

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
}

}  // namespace

void RegimeSpec::validate(int n_known_classes) const {
  if (!(labeled_fraction >= 0.0 && labeled_fraction <= 1.0))
    throw ConfigError("labeled_fraction must lie in [0, 1]");
  if (n_augmented < 0) throw ConfigError("augmented class count must be >= 0");
  for (int c : hidden_classes)
    if (c < 0 || c >= n_known_classes)
      throw ConfigError("hidden class " + std::to_string(c) + " outside 0.." + std::to_string(n_known_classes - 1));
  if (labeled_fraction > 0.0 && static_cast<int>(hidden_classes.size()) == n_known_classes)
    throw ConfigError("contradictory regime: positive labeled fraction with every class hidden");
}

std::set<int> RegimeSpec::visible_classes(int n_known_classes) const {
  std::set<int> visible;
  for (int c = 0; c < n_known_classes; ++c)
    if (!hidden_classes.count(c)) visible.insert(c);
  return visible;
}

RegimeSplit build_regime(const DatasetBundle& bundle, const RegimeSpec& spec) {
  const int K = bundle.n_classes();
  spec.validate(K);

  std::vector<std::vector<int>> by_class(static_cast<size_t>(K));
  for (size_t i = 0; i < bundle.train.size(); ++i) {
    const auto& s = bundle.train[i];
    if (!s.label) throw DataError("training sample " + std::to_string(s.id) + " has no ground-truth label");
    by_class[static_cast<size_t>(*s.label)].push_back(static_cast<int>(i));
  }

  RegimeSplit split;
  Rng root(spec.seed);
  for (int c = 0; c < K; ++c) {
    auto& idx = by_class[static_cast<size_t>(c)];
    Rng rng = root.derive("class_split", static_cast<uint64_t>(c));
    shuffle_indices(idx, rng);

    const size_t n_val = static_cast<size_t>(std::floor(kValidationFraction * static_cast<double>(idx.size())));
    for (size_t i = 0; i < n_val; ++i) split.validation.push_back(bundle.train[static_cast<size_t>(idx[i])]);

    const size_t remaining = idx.size() - n_val;
    size_t n_labeled = 0;
    if (!spec.hidden_classes.count(c) && spec.labeled_fraction > 0.0 && remaining > 0) {
      n_labeled = static_cast<size_t>(std::floor(spec.labeled_fraction * static_cast<double>(remaining)));
      n_labeled = std::max<size_t>(n_labeled, 1);
    }
    for (size_t i = n_val; i < idx.size(); ++i) {
      SeriesSample s = bundle.train[static_cast<size_t>(idx[i])];
      if (i - n_val < n_labeled) {
        split.labeled.push_back(std::move(s));
      } else {
        s.label.reset();
        split.unlabeled.push_back(std::move(s));
      }
    }
  }
  return split;
}

std::vector<MiniBatch> make_batches(int n_labeled, int n_unlabeled, int batch_size, uint64_t seed, int epoch) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (n_labeled < 0 || n_unlabeled < 0) throw ConfigError("negative side size");
  if (n_labeled == 0 && n_unlabeled == 0) throw ConfigError("both batch sides are empty");

  Rng root(seed);
  auto permutation = [&](const char* tag, int n) {
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    Rng rng = root.derive(tag, static_cast<uint64_t>(epoch));
    shuffle_indices(idx, rng);
    return idx;
  };

  const bool labeled_major = n_labeled >= n_unlabeled;
  const int major_n = labeled_major ? n_labeled : n_unlabeled;
  const int minor_n = labeled_major ? n_unlabeled : n_labeled;

  const std::vector<int> major = permutation(labeled_major ? "labeled" : "unlabeled", major_n);
  // Equal sizes: both sides are consumed exactly once, no resampling.
  const bool paired = minor_n == major_n;
  const std::vector<int> minor_perm = paired ? permutation(labeled_major ? "unlabeled" : "labeled", minor_n)
                                             : std::vector<int>{};
  Rng resample = root.derive("resample", static_cast<uint64_t>(epoch));

  std::vector<MiniBatch> batches;
  for (int start = 0; start < major_n; start += batch_size) {
    const int count = std::min(batch_size, major_n - start);
    MiniBatch b;
    std::vector<int>& major_half = labeled_major ? b.labeled : b.unlabeled;
    std::vector<int>& minor_half = labeled_major ? b.unlabeled : b.labeled;
    major_half.assign(major.begin() + start, major.begin() + start + count);
    if (paired) {
      minor_half.assign(minor_perm.begin() + start, minor_perm.begin() + start + count);
    } else if (minor_n > 0) {
      minor_half.resize(static_cast<size_t>(count));
      for (int i = 0; i < count; ++i)
        minor_half[static_cast<size_t>(i)] = static_cast<int>(resample.uniform_int(0, minor_n - 1));
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace susl
