#pragma once

#include <filesystem>
#include <set>

#include "susl/dataset.hpp"
#include "susl/model.hpp"

namespace susl {

/// Assignment of predicted clusters to true classes. `target[c]` is the true
/// class whose column cluster c folds into (-1 for clusters that saw no
/// samples); `credited[c]` marks the at-most-one cluster per true class
/// whose hits count as correct.
struct ClusterMap {
  std::vector<int> target;
  std::vector<bool> credited;

  int n_clusters() const { return static_cast<int>(target.size()); }
};

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
};

struct EvalReport {
  std::vector<std::vector<int64_t>> confusion;         // true class x predicted cluster
  std::vector<std::vector<int64_t>> confusion_mapped;  // true class x mapped class
  ClusterMap cluster_map;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  int64_t n_samples = 0;
};

/// Most probable cluster; ties resolve to the lowest index.
int predict(const Parameters& p, const ModelConfig& cfg, const Array& x);
std::vector<int> predict_batch(const Parameters& p, const ModelConfig& cfg, std::span<const SeriesSample> samples,
                               int chunk = 256);

/// Maximum-weight bipartite assignment (Hungarian method). Returns, per row,
/// the matched column (columns used at most once); requires cols >= rows.
std::vector<int> max_weight_assignment(const std::vector<std::vector<int64_t>>& weight);

/// Visible (labeled during training) classes keep their identity slot; the
/// remaining clusters are matched to the remaining true classes by maximum
/// co-occurrence; surplus clusters fold into their majority true class for
/// reporting but are never credited.
ClusterMap map_clusters(std::span<const int> predictions, std::span<const int> truths, int n_true_classes,
                        int n_clusters, const std::set<int>& visible_classes);

std::vector<std::vector<int64_t>> confusion_counts(std::span<const int> predictions, std::span<const int> truths,
                                                   int n_true_classes, int n_clusters);
std::vector<std::vector<int64_t>> fold_confusion(const std::vector<std::vector<int64_t>>& raw, const ClusterMap& map);
double mapped_accuracy(const std::vector<std::vector<int64_t>>& raw, const ClusterMap& map);

/// Accuracy, macro F1 and support-weighted F1 of a square confusion matrix.
/// A class that is never predicted (or never occurs) scores F1 = 0.
Metrics score(const std::vector<std::vector<int64_t>>& confusion);

/// Accuracy of always predicting the training majority class on the test set.
double majority_baseline(const DatasetBundle& bundle);

/// Full test/validation-side report. Samples must carry ground truth.
EvalReport evaluate(const Parameters& p, const ModelConfig& cfg, std::span<const SeriesSample> samples,
                    const std::set<int>& visible_classes);

struct EmbeddingRow {
  int64_t id;
  int true_class;  // -1 when unknown
  int predicted;
  std::vector<double> z;
};

/// Posterior mean under each sample's predicted cluster; deterministic.
std::vector<EmbeddingRow> export_embeddings(const Parameters& p, const ModelConfig& cfg,
                                            std::span<const SeriesSample> samples);
void write_embeddings_csv(const std::filesystem::path& path, std::span<const EmbeddingRow> rows);

/// Draw `count` series from the class prior and decode them:
/// output (count, channels, length).
Array sample_class(const Parameters& p, const ModelConfig& cfg, int cls, int count, uint64_t seed);

}  // namespace susl
