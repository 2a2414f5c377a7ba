#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "support/fixtures.hpp"
#include "susl/errors.hpp"
#include "susl/regime.hpp"
#include "susl/rng.hpp"

using namespace susl;
using namespace susl::testing;

TEST_CASE("ucr ingestion remaps labels and counts classes") {
  TempDir tmp("ucr");
  const ClassCounts counts = scale_counts(electric_devices_counts(), 100);
  write_ucr_fixture(tmp.path(), counts);
  const DatasetBundle b = ingest_ucr_tsv(tmp.path());
  CHECK(b.channels == 1);
  CHECK(b.length == 96);
  CHECK(b.n_classes() == 7);
  CHECK(b.class_counts(b.train) == counts.train);
  CHECK(b.class_counts(b.test) == counts.test);
}

TEST_CASE("ucr ingestion rejects ragged rows and unknown labels") {
  TempDir tmp("ucr_bad");
  {
    std::ofstream os(tmp.path() / "X_TRAIN.tsv");
    os << "1";
    for (int i = 0; i < 95; ++i) os << "\t0.5";  // one value short
    os << "\n";
  }
  {
    std::ofstream os(tmp.path() / "X_TEST.tsv");
    os << "1";
    for (int i = 0; i < 96; ++i) os << "\t0.5";
    os << "\n";
  }
  CHECK_THROWS_WITH_AS(ingest_ucr_tsv(tmp.path()), doctest::Contains("ragged"), DataError);

  TempDir tmp2("ucr_bad2");
  for (const char* name : {"X_TRAIN.tsv", "X_TEST.tsv"}) {
    std::ofstream os(tmp2.path() / name);
    os << "9";
    for (int i = 0; i < 96; ++i) os << "\t0.5";
    os << "\n";
  }
  CHECK_THROWS_WITH_AS(ingest_ucr_tsv(tmp2.path()), doctest::Contains("label"), DataError);
}

TEST_CASE("heartbeat ingestion truncates the zero pad column and counts classes") {
  TempDir tmp("ecg");
  const ClassCounts counts = scale_counts(ecg_counts(), 500);
  write_mitbih_fixture(tmp.path(), counts);
  const DatasetBundle b = ingest_mitbih_csv(tmp.path() / "mitbih_train.csv", tmp.path() / "mitbih_test.csv");
  CHECK(b.length == 186);
  CHECK(b.n_classes() == 5);
  CHECK(b.class_counts(b.train) == counts.train);
  CHECK(b.class_counts(b.test) == counts.test);
  CHECK(static_cast<int64_t>(b.train.size() + b.test.size()) == counts.train_total() + counts.test_total());
}

TEST_CASE("heartbeat ingestion skips one non-numeric header row") {
  TempDir tmp("ecg_header");
  auto write = [&](const char* name) {
    std::ofstream os(tmp.path() / name);
    os << "c0,c1,c2,label\n";
    os << "0.1,0.2,0.0,3\n";
  };
  write("train.csv");
  write("test.csv");
  // 3 samples per row is neither 186 nor 187
  CHECK_THROWS_WITH_AS(ingest_mitbih_csv(tmp.path() / "train.csv", tmp.path() / "test.csv"),
                       doctest::Contains("186"), DataError);
}

TEST_CASE("heartbeat ingestion rejects inconsistent widths and bad labels") {
  TempDir tmp("ecg_bad");
  {
    std::ofstream os(tmp.path() / "train.csv");
    for (int r = 0; r < 2; ++r) {
      for (int i = 0; i < (r == 0 ? 187 : 150); ++i) os << "0.0,";
      os << "1\n";
    }
  }
  {
    std::ofstream os(tmp.path() / "test.csv");
    for (int i = 0; i < 187; ++i) os << "0.0,";
    os << "1\n";
  }
  CHECK_THROWS_WITH_AS(ingest_mitbih_csv(tmp.path() / "train.csv", tmp.path() / "test.csv"),
                       doctest::Contains("width"), DataError);

  TempDir tmp2("ecg_bad2");
  for (const char* name : {"train.csv", "test.csv"}) {
    std::ofstream os(tmp2.path() / name);
    for (int i = 0; i < 187; ++i) os << "0.0,";
    os << "7\n";
  }
  CHECK_THROWS_WITH_AS(ingest_mitbih_csv(tmp2.path() / "train.csv", tmp2.path() / "test.csv"),
                       doctest::Contains("label"), DataError);
}

TEST_CASE("activity ingestion assembles nine channels") {
  TempDir tmp("har");
  const ClassCounts counts = scale_counts(har_counts(), 100);
  write_har_fixture(tmp.path(), counts);
  const DatasetBundle b = ingest_har_dir(tmp.path());
  CHECK(b.channels == 9);
  CHECK(b.length == 128);
  CHECK(b.n_classes() == 6);
  CHECK(b.class_counts(b.train) == counts.train);
  CHECK(b.class_counts(b.test) == counts.test);
}

TEST_CASE("activity ingestion requires every channel file") {
  TempDir tmp("har_bad");
  const ClassCounts counts = scale_counts(har_counts(), 300);
  write_har_fixture(tmp.path(), counts);
  std::filesystem::remove(tmp.path() / "train" / "Inertial Signals" / "body_gyro_z_train.txt");
  CHECK_THROWS_WITH_AS(ingest_har_dir(tmp.path()), doctest::Contains("missing channel"), DataError);
}

TEST_CASE("activity ingestion cross-checks rows against labels") {
  TempDir tmp("har_bad2");
  const ClassCounts counts = scale_counts(har_counts(), 300);
  write_har_fixture(tmp.path(), counts);
  {
    std::ofstream os(tmp.path() / "train" / "y_train.txt", std::ios::app);
    os << "3\n";  // one label too many
  }
  CHECK_THROWS_WITH_AS(ingest_har_dir(tmp.path()), doctest::Contains("labels"), DataError);
}

TEST_CASE("ingestion is bit reproducible") {
  TempDir tmp("repro");
  write_ucr_fixture(tmp.path(), scale_counts(electric_devices_counts(), 200));
  const DatasetBundle a = ingest_ucr_tsv(tmp.path());
  const DatasetBundle b = ingest_ucr_tsv(tmp.path());
  REQUIRE(a.train.size() == b.train.size());
  for (size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].values == b.train[i].values);
    CHECK(a.train[i].label == b.train[i].label);
    CHECK(a.train[i].id == b.train[i].id);
  }
}

namespace {

DatasetBundle small_bundle(int per_class, int classes = 3, int length = 6, uint64_t seed = 5) {
  DatasetBundle b;
  b.name = "unit";
  b.channels = 2;
  b.length = length;
  for (int c = 0; c < classes; ++c) b.class_names.push_back("c" + std::to_string(c));
  Rng rng(seed);
  int64_t id = 0;
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      SeriesSample s;
      s.label = c;
      s.id = id++;
      for (int j = 0; j < 2 * length; ++j) s.values.push_back(rng.uniform(-3, 3));
      b.train.push_back(std::move(s));
    }
  for (int c = 0; c < classes; ++c) {
    SeriesSample s;
    s.label = c;
    s.id = id++;
    for (int j = 0; j < 2 * length; ++j) s.values.push_back(rng.uniform(-3, 3));
    b.test.push_back(std::move(s));
  }
  return b;
}

}  // namespace

TEST_CASE("znormalize standardizes each channel") {
  DatasetBundle b = small_bundle(4);
  // make one channel constant
  for (int j = 0; j < b.length; ++j) b.train[0].values[static_cast<size_t>(j)] = 2.5;
  const DatasetBundle z = znormalize(b);
  for (int j = 0; j < b.length; ++j) CHECK(z.train[0].values[static_cast<size_t>(j)] == 0.0);

  for (const auto& s : z.train)
    for (int ch = 0; ch < 2; ++ch) {
      double mean = 0.0, var = 0.0;
      const double* v = s.values.data() + ch * b.length;
      for (int j = 0; j < b.length; ++j) mean += v[j];
      mean /= b.length;
      for (int j = 0; j < b.length; ++j) var += (v[j] - mean) * (v[j] - mean);
      const double stddev = std::sqrt(var / b.length);
      CHECK(std::abs(mean) <= 1e-9);
      if (s.id != 0) CHECK(std::abs(stddev - 1.0) <= 1e-6);
    }

  // idempotence
  const DatasetBundle zz = znormalize(z);
  for (size_t i = 0; i < z.train.size(); ++i)
    for (size_t j = 0; j < z.train[i].values.size(); ++j)
      CHECK(std::abs(z.train[i].values[j] - zz.train[i].values[j]) <= 1e-9);
}

TEST_CASE("bundle container round-trips") {
  TempDir tmp("bundle");
  const DatasetBundle b = small_bundle(3);
  save_bundle(b, tmp.path() / "unit");
  const DatasetBundle loaded = load_bundle(tmp.path() / "unit");
  CHECK(loaded.name == b.name);
  CHECK(loaded.channels == b.channels);
  CHECK(loaded.length == b.length);
  CHECK(loaded.class_names == b.class_names);
  REQUIRE(loaded.train.size() == b.train.size());
  REQUIRE(loaded.test.size() == b.test.size());
  for (size_t i = 0; i < b.train.size(); ++i) {
    CHECK(loaded.train[i].values == b.train[i].values);
    CHECK(loaded.train[i].label == b.train[i].label);
  }
  CHECK_THROWS_AS(load_bundle(tmp.path() / "absent"), DataError);
}

TEST_CASE("supervised regime keeps every remaining sample labeled") {
  const DatasetBundle b = small_bundle(10);
  RegimeSpec spec;
  spec.labeled_fraction = 1.0;
  spec.seed = 3;
  const RegimeSplit split = build_regime(b, spec);
  CHECK(split.unlabeled.empty());
  CHECK(split.validation.size() == 6);  // floor(0.2 * 10) per class
  CHECK(split.labeled.size() == b.train.size() - split.validation.size());
}

TEST_CASE("unsupervised regime strips every label") {
  const DatasetBundle b = small_bundle(10);
  RegimeSpec spec;
  spec.labeled_fraction = 0.0;
  spec.seed = 3;
  const RegimeSplit split = build_regime(b, spec);
  CHECK(split.labeled.empty());
  CHECK(split.unlabeled.size() == b.train.size() - split.validation.size());
  for (const auto& s : split.unlabeled) CHECK_FALSE(s.label.has_value());
  for (const auto& s : split.validation) CHECK(s.label.has_value());
}

TEST_CASE("hidden classes contribute no labels and the fraction applies per class") {
  const DatasetBundle b = small_bundle(20, 5);
  RegimeSpec spec;
  spec.labeled_fraction = 0.2;
  spec.hidden_classes = {2, 4};
  spec.seed = 9;
  const RegimeSplit split = build_regime(b, spec);
  std::vector<int> labeled_counts(5, 0);
  for (const auto& s : split.labeled) ++labeled_counts[static_cast<size_t>(*s.label)];
  CHECK(labeled_counts[0] == 3);  // floor(0.2 * 16)
  CHECK(labeled_counts[1] == 3);
  CHECK(labeled_counts[2] == 0);
  CHECK(labeled_counts[3] == 3);
  CHECK(labeled_counts[4] == 0);
}

TEST_CASE("a positive fraction keeps at least one label per visible class") {
  const DatasetBundle b = small_bundle(5);
  RegimeSpec spec;
  spec.labeled_fraction = 0.01;
  const RegimeSplit split = build_regime(b, spec);
  std::vector<int> labeled_counts(3, 0);
  for (const auto& s : split.labeled) ++labeled_counts[static_cast<size_t>(*s.label)];
  for (int c = 0; c < 3; ++c) CHECK(labeled_counts[static_cast<size_t>(c)] == 1);
}

TEST_CASE("regime splits partition the training set") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const DatasetBundle b = small_bundle(5 + static_cast<int>(rng.uniform_int(0, 20)), 4);
    RegimeSpec spec;
    spec.labeled_fraction = rng.uniform(0.0, 1.0);
    spec.seed = rng.next_u64();
    const int n_hidden = static_cast<int>(rng.uniform_int(0, 3));
    while (static_cast<int>(spec.hidden_classes.size()) < n_hidden)
      spec.hidden_classes.insert(static_cast<int>(rng.uniform_int(0, 3)));
    const RegimeSplit split = build_regime(b, spec);

    CHECK(split.labeled.size() + split.unlabeled.size() + split.validation.size() == b.train.size());
    std::set<int64_t> ids;
    for (const auto* part : {&split.labeled, &split.unlabeled, &split.validation})
      for (const auto& s : *part) CHECK(ids.insert(s.id).second);
    for (const auto& s : split.labeled) CHECK_FALSE(spec.hidden_classes.count(*s.label));
  }
}

TEST_CASE("contradictory regimes are rejected") {
  const DatasetBundle b = small_bundle(5);
  RegimeSpec spec;
  spec.labeled_fraction = 0.5;
  spec.hidden_classes = {0, 1, 2};
  CHECK_THROWS_AS(build_regime(b, spec), ConfigError);
  RegimeSpec ul = spec;
  ul.labeled_fraction = 0.0;
  CHECK_NOTHROW(build_regime(b, ul));
}

TEST_CASE("batch pairing resamples the smaller side") {
  const auto batches = make_batches(100, 1000, 512, 1, 0);
  REQUIRE(batches.size() == 2);
  CHECK(batches[0].unlabeled.size() == 512);
  CHECK(batches[0].labeled.size() == 512);
  CHECK(batches[1].unlabeled.size() == 488);
  CHECK(batches[1].labeled.size() == 488);
  std::set<int> unlabeled_seen;
  for (const auto& batch : batches)
    for (int i : batch.unlabeled) unlabeled_seen.insert(i);
  CHECK(unlabeled_seen.size() == 1000);  // larger side consumed exactly once
  for (const auto& batch : batches)
    for (int i : batch.labeled) CHECK(i < 100);
}

TEST_CASE("equal sides are both consumed exactly once") {
  const auto batches = make_batches(512, 512, 512, 7, 3);
  REQUIRE(batches.size() == 1);
  std::set<int> lab(batches[0].labeled.begin(), batches[0].labeled.end());
  std::set<int> unl(batches[0].unlabeled.begin(), batches[0].unlabeled.end());
  CHECK(lab.size() == 512);
  CHECK(unl.size() == 512);
}

TEST_CASE("an empty side yields empty halves") {
  const auto batches = make_batches(0, 700, 512, 1, 0);
  REQUIRE(batches.size() == 2);
  CHECK(batches[0].labeled.empty());
  CHECK(batches[0].unlabeled.size() == 512);
  CHECK_THROWS_AS(make_batches(0, 0, 512, 1, 0), ConfigError);
}

TEST_CASE("batch streams are reproducible per epoch and differ across epochs") {
  const auto a = make_batches(50, 300, 64, 42, 3);
  const auto b = make_batches(50, 300, 64, 42, 3);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].labeled == b[i].labeled);
    CHECK(a[i].unlabeled == b[i].unlabeled);
  }
  const auto c = make_batches(50, 300, 64, 42, 4);
  bool any_diff = false;
  for (size_t i = 0; i < a.size() && !any_diff; ++i) any_diff = a[i].unlabeled != c[i].unlabeled;
  CHECK(any_diff);
}
