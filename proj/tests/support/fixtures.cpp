#include "support/fixtures.hpp"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <stdexcept>
#include <string>

namespace susl::testing {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("fixture: cannot write " + path.string());
  return os;
}

// Cheap deterministic value in [0, 0.9]; varies within and across rows so
// normalization never sees a constant channel.
int digit(int64_t row, int col) { return static_cast<int>((row * 31 + col * 7 + (row % 5) * col) % 10); }

}  // namespace

ClassCounts scale_counts(const ClassCounts& counts, int64_t divisor) {
  ClassCounts scaled;
  for (int64_t v : counts.train) scaled.train.push_back(std::max<int64_t>(1, v / divisor));
  for (int64_t v : counts.test) scaled.test.push_back(std::max<int64_t>(1, v / divisor));
  return scaled;
}

void write_ucr_fixture(const fs::path& dir, const ClassCounts& counts) {
  fs::create_directories(dir);
  for (const auto& split : {std::pair{"_TRAIN.tsv", &counts.train}, std::pair{"_TEST.tsv", &counts.test}}) {
    std::ofstream os = open_out(dir / ("ElectricDevices" + std::string(split.first)));
    std::string line;
    int64_t row = 0;
    for (size_t cls = 0; cls < split.second->size(); ++cls)
      for (int64_t i = 0; i < (*split.second)[cls]; ++i, ++row) {
        line.clear();
        line += std::to_string(cls + 1);
        for (int j = 0; j < 96; ++j) {
          line += '\t';
          line += "0.";
          line += static_cast<char>('0' + digit(row, j));
        }
        line += '\n';
        os << line;
      }
  }
}

void write_mitbih_fixture(const fs::path& dir, const ClassCounts& counts) {
  fs::create_directories(dir);
  for (const auto& split : {std::pair{"mitbih_train.csv", &counts.train}, std::pair{"mitbih_test.csv", &counts.test}}) {
    std::ofstream os = open_out(dir / split.first);
    std::string line;
    int64_t row = 0;
    for (size_t cls = 0; cls < split.second->size(); ++cls)
      for (int64_t i = 0; i < (*split.second)[cls]; ++i, ++row) {
        line.clear();
        for (int j = 0; j < 187; ++j) {
          if (j == 186) {
            line += "0.0,";  // trailing pad column
          } else {
            line += "0.";
            line += static_cast<char>('0' + digit(row, j));
            line += ',';
          }
        }
        line += std::to_string(cls);
        line += ".0\n";
        os << line;
      }
  }
}

void write_har_fixture(const fs::path& dir, const ClassCounts& counts) {
  static const char* kSignals[9] = {"body_acc_x", "body_acc_y", "body_acc_z", "body_gyro_x", "body_gyro_y",
                                    "body_gyro_z", "total_acc_x", "total_acc_y", "total_acc_z"};
  for (const auto& split : {std::pair{"train", &counts.train}, std::pair{"test", &counts.test}}) {
    const fs::path base = dir / split.first;
    fs::create_directories(base / "Inertial Signals");
    {
      std::ofstream os = open_out(base / ("y_" + std::string(split.first) + ".txt"));
      for (size_t cls = 0; cls < split.second->size(); ++cls)
        for (int64_t i = 0; i < (*split.second)[cls]; ++i) os << (cls + 1) << "\n";
    }
    for (int ch = 0; ch < 9; ++ch) {
      std::ofstream os =
          open_out(base / "Inertial Signals" / (std::string(kSignals[ch]) + "_" + split.first + ".txt"));
      std::string line;
      int64_t row = 0;
      for (size_t cls = 0; cls < split.second->size(); ++cls)
        for (int64_t i = 0; i < (*split.second)[cls]; ++i, ++row) {
          line.clear();
          for (int j = 0; j < 128; ++j) {
            line += " 0.";
            line += static_cast<char>('0' + digit(row + ch * 131, j));
          }
          line += '\n';
          os << line;
        }
    }
  }
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<uint64_t> counter{0};
  path_ = fs::temp_directory_path() /
          ("susl4ts_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter.fetch_add(1)));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

}  // namespace susl::testing
