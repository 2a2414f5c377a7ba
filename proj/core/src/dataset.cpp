#include "susl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "susl/errors.hpp"

namespace susl {

namespace fs = std::filesystem;

std::vector<int64_t> DatasetBundle::class_counts(const std::vector<SeriesSample>& split) const {
  std::vector<int64_t> counts(class_names.size(), 0);
  for (const auto& s : split)
    if (s.label) ++counts[static_cast<size_t>(*s.label)];
  return counts;
}

void DatasetBundle::validate() const {
  const size_t expect = static_cast<size_t>(channels) * static_cast<size_t>(length);
  for (const auto* split : {&train, &test})
    for (const auto& s : *split) {
      if (s.values.size() != expect)
        throw DataError("sample " + std::to_string(s.id) + " has " + std::to_string(s.values.size()) +
                        " values, expected " + std::to_string(expect));
      if (s.label && (*s.label < 0 || *s.label >= n_classes()))
        throw DataError("sample " + std::to_string(s.id) + " label out of range");
    }
}

namespace {

// Splits a line on commas and whitespace; returns the parsed doubles.
void parse_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  const char* p = line.c_str();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == ',' || *p == '\r')) ++p;
    if (p >= end) break;
    char* next = nullptr;
    const double v = std::strtod(p, &next);
    if (next == p) throw DataError("unparseable field '" + std::string(p, std::min(p + 12, end)) + "'");
    out.push_back(v);
    p = next;
  }
}

bool numeric_row(const std::string& line) {
  const char* p = line.c_str();
  while (*p == ' ' || *p == '\t') ++p;
  return *p == '+' || *p == '-' || *p == '.' || (*p >= '0' && *p <= '9');
}

int integral_label(double v, int lo, int hi, const std::string& where) {
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-9 || r < lo || r > hi)
    throw DataError(where + ": unknown label " + std::to_string(v) + " (expected " + std::to_string(lo) + ".." +
                    std::to_string(hi) + ")");
  return static_cast<int>(r);
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::ifstream open_or_throw(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  return is;
}

void read_label_rows(const fs::path& path, int expected_values, int label_lo, int label_hi,
                     std::vector<SeriesSample>& out, int64_t& next_id) {
  std::ifstream is = open_or_throw(path);
  std::string line;
  std::vector<double> row;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    parse_row(line, row);
    if (static_cast<int>(row.size()) != expected_values + 1)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": ragged row with " +
                      std::to_string(row.size() - 1) + " values, expected " + std::to_string(expected_values));
    SeriesSample s;
    s.label = integral_label(row[0], label_lo, label_hi, path.string() + ":" + std::to_string(line_no)) - label_lo;
    s.values.assign(row.begin() + 1, row.end());
    s.id = next_id++;
    out.push_back(std::move(s));
  }
}

fs::path find_split_file(const fs::path& dir, const std::string& tag) {
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string stem = entry.path().filename().string();
    if (stem.find(tag) != std::string::npos) return entry.path();
  }
  throw DataError("no *" + tag + "* file in " + dir.string());
}

}  // namespace

DatasetBundle ingest_ucr_tsv(const fs::path& path) {
  if (fs::is_directory(path))
    return ingest_ucr_tsv(find_split_file(path, "_TRAIN"), find_split_file(path, "_TEST"));
  return ingest_ucr_tsv(fs::path(path.string() + "_TRAIN.tsv"), fs::path(path.string() + "_TEST.tsv"));
}

DatasetBundle ingest_ucr_tsv(const fs::path& train_file, const fs::path& test_file) {
  DatasetBundle b;
  b.name = "electric_devices";
  b.channels = 1;
  b.length = 96;
  b.class_names = {"1", "2", "3", "4", "5", "6", "7"};
  int64_t id = 0;
  read_label_rows(train_file, b.length, 1, 7, b.train, id);
  read_label_rows(test_file, b.length, 1, 7, b.test, id);
  b.validate();
  return b;
}

DatasetBundle ingest_mitbih_csv(const fs::path& train_file, const fs::path& test_file) {
  DatasetBundle b;
  b.name = "ecg_mitbih";
  b.channels = 1;
  b.class_names = {"N", "S", "V", "F", "Q"};

  int width = -1;
  auto read_split = [&](const fs::path& path, std::vector<SeriesSample>& out, int64_t& next_id) {
    std::ifstream is = open_or_throw(path);
    std::string line;
    std::vector<double> row;
    size_t line_no = 0;
    bool first = true;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r,") == std::string::npos) continue;
      if (first && !numeric_row(line)) {  // header row
        first = false;
        continue;
      }
      first = false;
      parse_row(line, row);
      if (width < 0) width = static_cast<int>(row.size());
      if (static_cast<int>(row.size()) != width)
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": inconsistent row width " +
                        std::to_string(row.size()) + " (first row had " + std::to_string(width) + ")");
      SeriesSample s;
      s.label = integral_label(row.back(), 0, 4, path.string() + ":" + std::to_string(line_no));
      s.values.assign(row.begin(), row.end() - 1);
      s.id = next_id++;
      out.push_back(std::move(s));
    }
  };

  int64_t id = 0;
  read_split(train_file, b.train, id);
  read_split(test_file, b.test, id);
  const int raw_length = width - 1;
  if (raw_length != 186 && raw_length != 187)
    throw DataError("beat rows carry " + std::to_string(raw_length) + " samples, expected 186 or 187");
  b.length = raw_length;
  if (raw_length == 187) {
    bool pad_zero = true;
    for (const auto* split : {&b.train, &b.test})
      for (const auto& s : *split)
        if (s.values.back() != 0.0) {
          pad_zero = false;
          break;
        }
    if (pad_zero) {
      for (auto* split : {&b.train, &b.test})
        for (auto& s : *split) s.values.pop_back();
      b.length = 186;
    }
  }
  b.validate();
  return b;
}

namespace {

const char* kHarSignals[9] = {"body_acc_x", "body_acc_y", "body_acc_z", "body_gyro_x", "body_gyro_y",
                              "body_gyro_z", "total_acc_x", "total_acc_y", "total_acc_z"};

void read_har_split(const fs::path& root, const std::string& split, std::vector<SeriesSample>& out,
                    int64_t& next_id) {
  const fs::path dir = root / split;
  const fs::path signals = dir / "Inertial Signals";
  const int length = 128;

  std::vector<int> labels;
  {
    std::ifstream is = open_or_throw(dir / ("y_" + split + ".txt"));
    std::string line;
    std::vector<double> row;
    while (std::getline(is, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      parse_row(line, row);
      if (row.size() != 1) throw DataError("label rows must hold one value");
      labels.push_back(integral_label(row[0], 1, 6, "y_" + split) - 1);
    }
  }

  out.resize(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    out[i].label = labels[i];
    out[i].id = next_id++;
    out[i].values.assign(9 * static_cast<size_t>(length), 0.0);
  }

  for (int ch = 0; ch < 9; ++ch) {
    const fs::path file = signals / (std::string(kHarSignals[ch]) + "_" + split + ".txt");
    if (!fs::exists(file)) throw DataError("missing channel file " + file.string());
    std::ifstream is = open_or_throw(file);
    std::string line;
    std::vector<double> row;
    size_t r = 0;
    while (std::getline(is, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (r >= out.size())
        throw DataError(file.string() + ": more rows than labels (" + std::to_string(labels.size()) + ")");
      parse_row(line, row);
      if (static_cast<int>(row.size()) != length)
        throw DataError(file.string() + ":" + std::to_string(r + 1) + ": ragged row with " +
                        std::to_string(row.size()) + " values, expected 128");
      std::copy(row.begin(), row.end(), out[r].values.begin() + static_cast<int64_t>(ch) * length);
      ++r;
    }
    if (r != out.size())
      throw DataError(file.string() + ": row count " + std::to_string(r) + " does not match " +
                      std::to_string(labels.size()) + " labels");
  }
}

}  // namespace

DatasetBundle ingest_har_dir(const fs::path& root) {
  DatasetBundle b;
  b.name = "har";
  b.channels = 9;
  b.length = 128;
  b.class_names = {"walking", "walking_upstairs", "walking_downstairs", "sitting", "standing", "laying"};
  int64_t id = 0;
  read_har_split(root, "train", b.train, id);
  read_har_split(root, "test", b.test, id);
  b.validate();
  return b;
}

DatasetBundle znormalize(DatasetBundle bundle) {
  const int L = bundle.length;
  for (auto* split : {&bundle.train, &bundle.test})
    for (auto& s : *split)
      for (int ch = 0; ch < bundle.channels; ++ch) {
        double* v = s.values.data() + static_cast<int64_t>(ch) * L;
        double mean = 0.0;
        for (int i = 0; i < L; ++i) mean += v[i];
        mean /= L;
        double var = 0.0;
        for (int i = 0; i < L; ++i) var += (v[i] - mean) * (v[i] - mean);
        const double std = std::sqrt(var / L);
        if (std < 1e-8)
          for (int i = 0; i < L; ++i) v[i] -= mean;
        else
          for (int i = 0; i < L; ++i) v[i] = (v[i] - mean) / std;
      }
  return bundle;
}

void save_bundle(const DatasetBundle& bundle, const fs::path& prefix) {
  {
    std::ofstream meta(prefix.string() + ".meta");
    if (!meta) throw DataError("cannot write " + prefix.string() + ".meta");
    meta << "bundle_version=1\n";
    meta << "name=" << bundle.name << "\n";
    meta << "channels=" << bundle.channels << "\n";
    meta << "length=" << bundle.length << "\n";
    meta << "classes=";
    for (size_t i = 0; i < bundle.class_names.size(); ++i) meta << (i ? "," : "") << bundle.class_names[i];
    meta << "\n";
    meta << "train_count=" << bundle.train.size() << "\n";
    meta << "test_count=" << bundle.test.size() << "\n";
  }
  std::ofstream data(prefix.string() + ".data");
  if (!data) throw DataError("cannot write " + prefix.string() + ".data");
  auto write_split = [&data](const char* tag, const std::vector<SeriesSample>& split) {
    std::string line;
    for (const auto& s : split) {
      line.clear();
      line += tag;
      line += ',';
      line += std::to_string(s.label ? *s.label : -1);
      for (double v : s.values) {
        line += ',';
        line += format_double(v);
      }
      line += '\n';
      data << line;
    }
  };
  write_split("train", bundle.train);
  write_split("test", bundle.test);
  if (!data) throw DataError("failed writing " + prefix.string() + ".data");
}

DatasetBundle load_bundle(const fs::path& prefix) {
  DatasetBundle b;
  size_t train_count = 0, test_count = 0;
  {
    std::ifstream meta = open_or_throw(prefix.string() + ".meta");
    std::string line;
    while (std::getline(meta, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq);
      std::string value = line.substr(eq + 1);
      if (!value.empty() && value.back() == '\r') value.pop_back();
      if (key == "name") b.name = value;
      else if (key == "channels") b.channels = std::stoi(value);
      else if (key == "length") b.length = std::stoi(value);
      else if (key == "train_count") train_count = std::stoul(value);
      else if (key == "test_count") test_count = std::stoul(value);
      else if (key == "classes") {
        std::stringstream ss(value);
        std::string name;
        while (std::getline(ss, name, ',')) b.class_names.push_back(name);
      }
    }
  }
  if (b.channels < 1 || b.length < 1 || b.class_names.empty())
    throw DataError(prefix.string() + ".meta is incomplete");

  std::ifstream data = open_or_throw(prefix.string() + ".data");
  std::string line;
  int64_t id = 0;
  const size_t expect = static_cast<size_t>(b.channels) * static_cast<size_t>(b.length);
  size_t line_no = 0;
  while (std::getline(data, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw DataError(prefix.string() + ".data:" + std::to_string(line_no) + ": malformed row");
    const std::string split = line.substr(0, c1);
    const int label = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
    SeriesSample s;
    s.id = id++;
    if (label >= 0) s.label = label;
    std::vector<double> row;
    parse_row(line.substr(c2 + 1), row);
    if (row.size() != expect)
      throw DataError(prefix.string() + ".data:" + std::to_string(line_no) + ": row has " +
                      std::to_string(row.size()) + " values, expected " + std::to_string(expect));
    s.values = std::move(row);
    if (split == "train") b.train.push_back(std::move(s));
    else if (split == "test") b.test.push_back(std::move(s));
    else throw DataError(prefix.string() + ".data:" + std::to_string(line_no) + ": unknown split '" + split + "'");
  }
  if (b.train.size() != train_count || b.test.size() != test_count)
    throw DataError(prefix.string() + ": data rows do not match the counts in the metadata");
  b.validate();
  return b;
}

Array make_input_batch(std::span<const SeriesSample> samples, std::span<const int> indices, int channels,
                       int length) {
  const int n = static_cast<int>(indices.size());
  Array batch({n, channels, length});
  const int64_t stride = static_cast<int64_t>(channels) * length;
  for (int i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<size_t>(indices[static_cast<size_t>(i)])];
    if (static_cast<int64_t>(s.values.size()) != stride)
      throw ShapeError("sample " + std::to_string(s.id) + " does not match (channels, length)");
    std::copy(s.values.begin(), s.values.end(), batch.data() + i * stride);
  }
  return batch;
}

}  // namespace susl
