#pragma once

#include <filesystem>

#include "support/paper_tables.hpp"

namespace susl::testing {

// Format-exact raw dataset trees for the ingestion tests. Values are
// synthetic; the per-class row counts and the file layouts mirror the real
// distributions.

/// Writes <dir>/ElectricDevices_TRAIN.tsv and _TEST.tsv (label 1..7 + 96 values).
void write_ucr_fixture(const std::filesystem::path& dir, const ClassCounts& counts);

/// Writes <dir>/mitbih_train.csv and mitbih_test.csv (187 beat samples with an
/// all-zero trailing pad column, label 0..4 last).
void write_mitbih_fixture(const std::filesystem::path& dir, const ClassCounts& counts);

/// Writes the <dir>/{train,test}/Inertial Signals layout with nine signal
/// files of 128 samples per row plus y_{split}.txt labels 1..6.
void write_har_fixture(const std::filesystem::path& dir, const ClassCounts& counts);

/// Proportionally shrunken counts for fast unit tests (at least one sample
/// per class and split).
ClassCounts scale_counts(const ClassCounts& counts, int64_t divisor);

/// Scoped temporary directory.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace susl::testing
