#include "susl/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "susl/errors.hpp"
#include "susl/rng.hpp"

namespace susl {

namespace {

int argmax_row(const double* row, int n) {
  int best = 0;
  for (int j = 1; j < n; ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

int predict(const Parameters& p, const ModelConfig& cfg, const Array& x) {
  const std::vector<double> probs = classify(p, cfg, x);
  return argmax_row(probs.data(), static_cast<int>(probs.size()));
}

std::vector<int> predict_batch(const Parameters& p, const ModelConfig& cfg, std::span<const SeriesSample> samples,
                               int chunk) {
  std::vector<int> out;
  out.reserve(samples.size());
  const int C = cfg.total_classes();
  std::vector<int> idx(static_cast<size_t>(chunk));
  for (size_t start = 0; start < samples.size(); start += static_cast<size_t>(chunk)) {
    const int n = static_cast<int>(std::min<size_t>(static_cast<size_t>(chunk), samples.size() - start));
    idx.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = static_cast<int>(start) + i;
    const Array probs = classify_batch(p, cfg, make_input_batch(samples, idx, cfg.channels, cfg.length));
    for (int i = 0; i < n; ++i) out.push_back(argmax_row(probs.data() + static_cast<int64_t>(i) * C, C));
  }
  return out;
}

namespace {

// Hungarian method on a square cost matrix (minimization, O(n^3)).
std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = match[static_cast<size_t>(j0)];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost[static_cast<size_t>(i0 - 1)][static_cast<size_t>(j - 1)] -
                           u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (match[static_cast<size_t>(j)] > 0) row_to_col[static_cast<size_t>(match[static_cast<size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

}  // namespace

std::vector<int> max_weight_assignment(const std::vector<std::vector<int64_t>>& weight) {
  const int rows = static_cast<int>(weight.size());
  if (rows == 0) return {};
  const int cols = static_cast<int>(weight[0].size());
  if (cols < rows) throw ConfigError("assignment needs at least as many columns as rows");
  int64_t max_w = 0;
  for (const auto& r : weight)
    for (int64_t w : r) max_w = std::max(max_w, w);

  const int n = std::max(rows, cols);
  std::vector<std::vector<double>> cost(static_cast<size_t>(n),
                                        std::vector<double>(static_cast<size_t>(n), static_cast<double>(max_w)));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      cost[static_cast<size_t>(i)][static_cast<size_t>(j)] = static_cast<double>(max_w - weight[static_cast<size_t>(i)][static_cast<size_t>(j)]);

  const std::vector<int> full = min_cost_assignment(cost);
  return std::vector<int>(full.begin(), full.begin() + rows);
}

std::vector<std::vector<int64_t>> confusion_counts(std::span<const int> predictions, std::span<const int> truths,
                                                   int n_true_classes, int n_clusters) {
  if (predictions.size() != truths.size()) throw ConfigError("predictions and truths differ in length");
  std::vector<std::vector<int64_t>> m(static_cast<size_t>(n_true_classes),
                                      std::vector<int64_t>(static_cast<size_t>(n_clusters), 0));
  for (size_t i = 0; i < predictions.size(); ++i) {
    const int t = truths[i], c = predictions[i];
    if (t < 0 || t >= n_true_classes || c < 0 || c >= n_clusters)
      throw ConfigError("prediction or truth out of range");
    ++m[static_cast<size_t>(t)][static_cast<size_t>(c)];
  }
  return m;
}

ClusterMap map_clusters(std::span<const int> predictions, std::span<const int> truths, int n_true_classes,
                        int n_clusters, const std::set<int>& visible_classes) {
  const auto co = confusion_counts(predictions, truths, n_true_classes, n_clusters);

  std::vector<int> spare_clusters;
  for (int c = 0; c < n_clusters; ++c)
    if (!visible_classes.count(c)) spare_clusters.push_back(c);
  std::vector<int> remaining_classes;
  for (int t = 0; t < n_true_classes; ++t)
    if (!visible_classes.count(t)) remaining_classes.push_back(t);

  ClusterMap map;
  map.target.assign(static_cast<size_t>(n_clusters), -1);
  map.credited.assign(static_cast<size_t>(n_clusters), false);
  for (int c : visible_classes) {
    map.target[static_cast<size_t>(c)] = c;
    map.credited[static_cast<size_t>(c)] = true;
  }

  if (!remaining_classes.empty()) {
    std::vector<std::vector<int64_t>> weight(remaining_classes.size(),
                                             std::vector<int64_t>(spare_clusters.size(), 0));
    for (size_t r = 0; r < remaining_classes.size(); ++r)
      for (size_t s = 0; s < spare_clusters.size(); ++s)
        weight[r][s] = co[static_cast<size_t>(remaining_classes[r])][static_cast<size_t>(spare_clusters[s])];
    const std::vector<int> assign = max_weight_assignment(weight);
    for (size_t r = 0; r < remaining_classes.size(); ++r)
      if (assign[r] >= 0 && assign[r] < static_cast<int>(spare_clusters.size())) {
        const int cluster = spare_clusters[static_cast<size_t>(assign[r])];
        map.target[static_cast<size_t>(cluster)] = remaining_classes[r];
        map.credited[static_cast<size_t>(cluster)] = true;
      }
  }

  // Surplus clusters fold into their majority true class; empty ones stay
  // unassigned. Neither is credited.
  for (int c : spare_clusters) {
    if (map.credited[static_cast<size_t>(c)]) continue;
    int64_t best = 0;
    int best_class = -1;
    for (int t = 0; t < n_true_classes; ++t)
      if (co[static_cast<size_t>(t)][static_cast<size_t>(c)] > best) {
        best = co[static_cast<size_t>(t)][static_cast<size_t>(c)];
        best_class = t;
      }
    map.target[static_cast<size_t>(c)] = best_class;
  }
  return map;
}

std::vector<std::vector<int64_t>> fold_confusion(const std::vector<std::vector<int64_t>>& raw,
                                                 const ClusterMap& map) {
  const size_t K = raw.size();
  const size_t C = map.target.size();
  std::vector<std::vector<int64_t>> folded(K, std::vector<int64_t>(K, 0));
  for (size_t t = 0; t < K; ++t) {
    if (raw[t].size() != C) throw ConfigError("cluster map does not match the confusion width");
    for (size_t c = 0; c < C; ++c) {
      const int target = map.target[c];
      if (target >= 0) folded[t][static_cast<size_t>(target)] += raw[t][c];
    }
  }
  return folded;
}

double mapped_accuracy(const std::vector<std::vector<int64_t>>& raw, const ClusterMap& map) {
  int64_t total = 0, hit = 0;
  for (size_t t = 0; t < raw.size(); ++t)
    for (size_t c = 0; c < raw[t].size(); ++c) {
      total += raw[t][c];
      if (map.credited[c] && map.target[c] == static_cast<int>(t)) hit += raw[t][c];
    }
  if (total == 0) throw ConfigError("empty confusion matrix");
  return static_cast<double>(hit) / static_cast<double>(total);
}

Metrics score(const std::vector<std::vector<int64_t>>& confusion) {
  const size_t K = confusion.size();
  if (K == 0) throw ConfigError("empty confusion matrix");
  int64_t total = 0, diag = 0;
  std::vector<int64_t> row_sum(K, 0), col_sum(K, 0);
  for (size_t i = 0; i < K; ++i) {
    if (confusion[i].size() != K) throw ConfigError("confusion matrix must be square");
    for (size_t j = 0; j < K; ++j) {
      row_sum[i] += confusion[i][j];
      col_sum[j] += confusion[i][j];
      total += confusion[i][j];
    }
    diag += confusion[i][i];
  }
  if (total == 0) throw ConfigError("empty confusion matrix");

  Metrics m;
  m.accuracy = static_cast<double>(diag) / static_cast<double>(total);
  double macro = 0.0, weighted = 0.0;
  for (size_t k = 0; k < K; ++k) {
    const double tp = static_cast<double>(confusion[k][k]);
    const double precision = col_sum[k] > 0 ? tp / static_cast<double>(col_sum[k]) : 0.0;
    const double recall = row_sum[k] > 0 ? tp / static_cast<double>(row_sum[k]) : 0.0;
    const double f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    macro += f1;
    weighted += f1 * static_cast<double>(row_sum[k]);
  }
  m.macro_f1 = macro / static_cast<double>(K);
  m.weighted_f1 = weighted / static_cast<double>(total);
  return m;
}

double majority_baseline(const DatasetBundle& bundle) {
  const auto train_counts = bundle.class_counts(bundle.train);
  const auto test_counts = bundle.class_counts(bundle.test);
  if (bundle.test.empty()) throw ConfigError("majority baseline needs a test split");
  size_t majority = 0;
  for (size_t k = 1; k < train_counts.size(); ++k)
    if (train_counts[k] > train_counts[majority]) majority = k;
  return static_cast<double>(test_counts[majority]) / static_cast<double>(bundle.test.size());
}

EvalReport evaluate(const Parameters& p, const ModelConfig& cfg, std::span<const SeriesSample> samples,
                    const std::set<int>& visible_classes) {
  if (samples.empty()) throw ConfigError("nothing to evaluate");
  std::vector<int> truths;
  truths.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.label) throw DataError("evaluation sample " + std::to_string(s.id) + " has no ground truth");
    truths.push_back(*s.label);
  }
  const std::vector<int> preds = predict_batch(p, cfg, samples);

  EvalReport report;
  report.n_samples = static_cast<int64_t>(samples.size());
  report.confusion = confusion_counts(preds, truths, cfg.n_known_classes, cfg.total_classes());
  report.cluster_map = map_clusters(preds, truths, cfg.n_known_classes, cfg.total_classes(), visible_classes);
  report.confusion_mapped = fold_confusion(report.confusion, report.cluster_map);
  report.accuracy = mapped_accuracy(report.confusion, report.cluster_map);
  const Metrics f = score(report.confusion_mapped);
  report.macro_f1 = f.macro_f1;
  report.weighted_f1 = f.weighted_f1;
  return report;
}

std::vector<EmbeddingRow> export_embeddings(const Parameters& p, const ModelConfig& cfg,
                                            std::span<const SeriesSample> samples) {
  const std::vector<int> preds = predict_batch(p, cfg, samples);
  std::vector<EmbeddingRow> rows(samples.size());
  const int d = cfg.latent_dim;
  constexpr int kChunk = 256;
  std::vector<int> idx;
  for (size_t start = 0; start < samples.size(); start += kChunk) {
    const int n = static_cast<int>(std::min<size_t>(kChunk, samples.size() - start));
    idx.resize(static_cast<size_t>(n));
    std::vector<int> classes(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      idx[static_cast<size_t>(i)] = static_cast<int>(start) + i;
      classes[static_cast<size_t>(i)] = preds[start + static_cast<size_t>(i)];
    }
    const Array z = encode_mean_batch(p, cfg, make_input_batch(samples, idx, cfg.channels, cfg.length), classes);
    for (int i = 0; i < n; ++i) {
      EmbeddingRow& row = rows[start + static_cast<size_t>(i)];
      const auto& s = samples[start + static_cast<size_t>(i)];
      row.id = s.id;
      row.true_class = s.label ? *s.label : -1;
      row.predicted = preds[start + static_cast<size_t>(i)];
      row.z.assign(z.data() + static_cast<int64_t>(i) * d, z.data() + static_cast<int64_t>(i + 1) * d);
    }
  }
  return rows;
}

void write_embeddings_csv(const std::filesystem::path& path, std::span<const EmbeddingRow> rows) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "id,true,pred";
  const size_t d = rows.empty() ? 0 : rows[0].z.size();
  for (size_t j = 0; j < d; ++j) os << ",z_" << j;
  os << "\n";
  for (const auto& row : rows) {
    os << row.id << ',' << row.true_class << ',' << row.predicted;
    for (double v : row.z) os << ',' << format_double(v);
    os << "\n";
  }
}

Array sample_class(const Parameters& p, const ModelConfig& cfg, int cls, int count, uint64_t seed) {
  const int C = cfg.total_classes();
  if (cls < 0 || cls >= C)
    throw ConfigError("class index " + std::to_string(cls) + " out of range 0.." + std::to_string(C - 1));
  if (count < 1) throw ConfigError("sample count must be >= 1");
  const int d = cfg.latent_dim;
  const auto [mean, logvar] = prior(p, cls);

  Rng rng = Rng(seed).derive("class_samples", static_cast<uint64_t>(cls));
  Array z({count, d});
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < d; ++j)
      z[static_cast<int64_t>(i) * d + j] =
          mean[static_cast<size_t>(j)] + std::exp(0.5 * logvar[static_cast<size_t>(j)]) * rng.normal();

  Tape t;
  const ParamNodes pn = stage_parameters(t, p);
  return t.value(decode_node(t, pn, cfg, t.leaf(std::move(z))));
}

}  // namespace susl
