#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "susl/array.hpp"

namespace susl {

/// One multichannel series. Values are channel-major (all of channel 0,
/// then channel 1, ...). The label is absent for unlabeled training data.
struct SeriesSample {
  std::vector<double> values;
  std::optional<int> label;
  int64_t id = 0;
};

struct DatasetBundle {
  std::string name;
  int channels = 0;
  int length = 0;
  std::vector<std::string> class_names;
  std::vector<SeriesSample> train;
  std::vector<SeriesSample> test;

  int n_classes() const { return static_cast<int>(class_names.size()); }
  std::vector<int64_t> class_counts(const std::vector<SeriesSample>& split) const;
  void validate() const;
};

/// Electric-consumption archive format: each row is an integer class label
/// in 1..7 followed by 96 readings, whitespace or comma separated. `path`
/// may be a directory holding the *_TRAIN/*_TEST pair or a common prefix.
DatasetBundle ingest_ucr_tsv(const std::filesystem::path& path);
DatasetBundle ingest_ucr_tsv(const std::filesystem::path& train_file, const std::filesystem::path& test_file);

/// Heartbeat csv format: comma-separated rows whose last column is the class
/// label in 0..4 (N,S,V,F,Q) and whose remaining columns are the zero-padded
/// beat samples. A trailing all-zero pad column is dropped so the canonical
/// length is 186.
DatasetBundle ingest_mitbih_csv(const std::filesystem::path& train_file, const std::filesystem::path& test_file);

/// Smartphone activity recording layout: root/{train,test}/Inertial Signals/
/// with nine fixed-width signal files of 128 samples per row, plus
/// root/{train,test}/y_{train,test}.txt labels in 1..6.
DatasetBundle ingest_har_dir(const std::filesystem::path& root);

/// Standardize every channel of every sample to zero mean, unit variance
/// (population std); near-constant channels are only centered.
DatasetBundle znormalize(DatasetBundle bundle);

/// Canonical two-file bundle container: <prefix>.meta holds key=value
/// metadata, <prefix>.data holds one comma-separated row per sample:
/// split,label_or_-1,values... (channel-major, shortest round-trip floats).
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& prefix);
DatasetBundle load_bundle(const std::filesystem::path& prefix);

/// Gather samples into one (n, channels, length) batch array.
Array make_input_batch(std::span<const SeriesSample> samples, std::span<const int> indices, int channels, int length);

}  // namespace susl
