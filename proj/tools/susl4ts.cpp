// Command line driver: ingest raw datasets into canonical bundles, train
// and evaluate models across labeling regimes, run hyperparameter searches,
// export latent embeddings, draw class-conditional samples, and render
// side-by-side regime reports.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical divergence.

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "susl/checkpoint.hpp"
#include "susl/dataset.hpp"
#include "susl/errors.hpp"
#include "susl/evaluation.hpp"
#include "susl/hpsearch.hpp"
#include "susl/trainer.hpp"

namespace fs = std::filesystem;
using namespace susl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// Experiment spec: one flat key=value view over everything a run needs.
// File values are overridden by explicit command line flags; the resolved
// spec is echoed into the output directory next to every artifact.
// ---------------------------------------------------------------------------

struct ExperimentSpec {
  std::string dataset_path;
  std::string dataset_format = "bundle";  // ucr-tsv | mitbih-csv | har-dir | bundle
  std::string dataset_test_path;          // second raw file where the format needs one
  bool znormalize_data = true;

  double labeled_fraction = 1.0;
  std::string hidden_classes;  // comma separated indices
  int augmented = 0;
  uint64_t regime_seed = 0;

  std::string variant = "conv";
  int latent_dim = 10;
  int layers = 2;
  int filters = 32;
  int units = 128;
  int kernel_size = 5;

  double lr = 1e-3;
  int epochs = 100;
  int batch_size = 512;
  double alpha = 1.0;   // classification term weight
  double gamma = 1.0;   // entropy regularizer weight
  double lambda_step = 0.1;
  double lambda_max = 1.0;
  double weight_decay = 0.0;
  double clip = 1.0;
  int micro_batch = 128;
  uint64_t train_seed = 0;

  int trials = 60;
  int jobs = 1;
  bool prune = false;

  std::string output_dir;
  std::string split = "test";  // eval/embed split
};

std::vector<std::pair<std::string, std::string>> spec_items(const ExperimentSpec& s) {
  return {
      {"dataset.path", s.dataset_path},
      {"dataset.format", s.dataset_format},
      {"dataset.test_path", s.dataset_test_path},
      {"dataset.znormalize", s.znormalize_data ? "true" : "false"},
      {"regime.labeled_fraction", format_double(s.labeled_fraction)},
      {"regime.hidden_classes", s.hidden_classes},
      {"regime.augmented", std::to_string(s.augmented)},
      {"regime.seed", std::to_string(s.regime_seed)},
      {"model.variant", s.variant},
      {"model.latent_dim", std::to_string(s.latent_dim)},
      {"model.layers", std::to_string(s.layers)},
      {"model.filters", std::to_string(s.filters)},
      {"model.units", std::to_string(s.units)},
      {"model.kernel_size", std::to_string(s.kernel_size)},
      {"train.lr", format_double(s.lr)},
      {"train.epochs", std::to_string(s.epochs)},
      {"train.batch_size", std::to_string(s.batch_size)},
      {"train.alpha", format_double(s.alpha)},
      {"train.gamma", format_double(s.gamma)},
      {"train.lambda_step", format_double(s.lambda_step)},
      {"train.lambda_max", format_double(s.lambda_max)},
      {"train.weight_decay", format_double(s.weight_decay)},
      {"train.clip", format_double(s.clip)},
      {"train.micro_batch", std::to_string(s.micro_batch)},
      {"train.seed", std::to_string(s.train_seed)},
      {"search.trials", std::to_string(s.trials)},
      {"search.jobs", std::to_string(s.jobs)},
      {"search.prune", s.prune ? "true" : "false"},
      {"output.dir", s.output_dir},
      {"eval.split", s.split},
  };
}

void apply_spec_item(ExperimentSpec& s, const std::string& key, const std::string& value) {
  auto as_bool = [&](const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("boolean expected for " + key + ", got '" + v + "'");
  };
  try {
    if (key == "dataset.path") s.dataset_path = value;
    else if (key == "dataset.format") s.dataset_format = value;
    else if (key == "dataset.test_path") s.dataset_test_path = value;
    else if (key == "dataset.znormalize") s.znormalize_data = as_bool(value);
    else if (key == "regime.labeled_fraction") s.labeled_fraction = std::stod(value);
    else if (key == "regime.hidden_classes") s.hidden_classes = value;
    else if (key == "regime.augmented") s.augmented = std::stoi(value);
    else if (key == "regime.seed") s.regime_seed = std::stoull(value);
    else if (key == "model.variant") s.variant = value;
    else if (key == "model.latent_dim") s.latent_dim = std::stoi(value);
    else if (key == "model.layers") s.layers = std::stoi(value);
    else if (key == "model.filters") s.filters = std::stoi(value);
    else if (key == "model.units") s.units = std::stoi(value);
    else if (key == "model.kernel_size") s.kernel_size = std::stoi(value);
    else if (key == "train.lr") s.lr = std::stod(value);
    else if (key == "train.epochs") s.epochs = std::stoi(value);
    else if (key == "train.batch_size") s.batch_size = std::stoi(value);
    else if (key == "train.alpha") s.alpha = std::stod(value);
    else if (key == "train.gamma") s.gamma = std::stod(value);
    else if (key == "train.lambda_step") s.lambda_step = std::stod(value);
    else if (key == "train.lambda_max") s.lambda_max = std::stod(value);
    else if (key == "train.weight_decay") s.weight_decay = std::stod(value);
    else if (key == "train.clip") s.clip = std::stod(value);
    else if (key == "train.micro_batch") s.micro_batch = std::stoi(value);
    else if (key == "train.seed") s.train_seed = std::stoull(value);
    else if (key == "search.trials") s.trials = std::stoi(value);
    else if (key == "search.jobs") s.jobs = std::stoi(value);
    else if (key == "search.prune") s.prune = as_bool(value);
    else if (key == "output.dir") s.output_dir = value;
    else if (key == "eval.split") s.split = value;
    else throw ConfigError("unknown config key '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw ConfigError("cannot parse value '" + value + "' for " + key);
  } catch (const std::out_of_range&) {
    throw ConfigError("value '" + value + "' out of range for " + key);
  }
}

void load_spec_file(ExperimentSpec& s, const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config file " + path.string());
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t");
      const auto e = v.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    apply_spec_item(s, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void print_spec(std::ostream& os, const ExperimentSpec& s) {
  for (const auto& [key, value] : spec_items(s)) os << key << "=" << value << "\n";
}

void echo_spec(const ExperimentSpec& s, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream os(dir / "resolved.cfg");
  if (!os) throw DataError("cannot write " + (dir / "resolved.cfg").string());
  // the echoed spec omits its own location so identical runs stay
  // byte-identical wherever they land
  for (const auto& [key, value] : spec_items(s))
    if (key != "output.dir") os << key << "=" << value << "\n";
}

std::set<int> parse_hidden(const std::string& csv) {
  std::set<int> hidden;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.find_first_not_of(" \t") == std::string::npos) continue;
    hidden.insert(std::stoi(tok));
  }
  return hidden;
}

RegimeSpec regime_from(const ExperimentSpec& s) {
  RegimeSpec r;
  r.labeled_fraction = s.labeled_fraction;
  r.hidden_classes = parse_hidden(s.hidden_classes);
  r.n_augmented = s.augmented;
  r.seed = s.regime_seed;
  return r;
}

ModelConfig model_from(const ExperimentSpec& s) {
  ModelConfig m;
  m.variant = variant_from_string(s.variant);
  m.latent_dim = s.latent_dim;
  m.layers = s.layers;
  m.filters = s.filters;
  m.units = s.units;
  m.kernel_size = s.kernel_size;
  return m;
}

TrainConfig train_from(const ExperimentSpec& s) {
  TrainConfig t;
  t.lr = s.lr;
  t.epochs = s.epochs;
  t.batch_size = s.batch_size;
  t.weights.class_weight = s.alpha;
  t.weights.entropy_weight = s.gamma;
  t.weights.weight_decay = s.weight_decay;
  t.weights.grad_clip = s.clip;
  t.lambda_step = s.lambda_step;
  t.lambda_max = s.lambda_max;
  t.micro_batch = s.micro_batch;
  t.seed = s.train_seed;
  return t;
}

DatasetBundle load_dataset(const ExperimentSpec& s) {
  DatasetBundle bundle;
  if (s.dataset_format == "bundle") {
    bundle = load_bundle(s.dataset_path);
  } else if (s.dataset_format == "ucr-tsv") {
    bundle = s.dataset_test_path.empty() ? ingest_ucr_tsv(s.dataset_path)
                                         : ingest_ucr_tsv(s.dataset_path, s.dataset_test_path);
  } else if (s.dataset_format == "mitbih-csv") {
    if (s.dataset_test_path.empty()) {
      const fs::path dir = s.dataset_path;
      bundle = ingest_mitbih_csv(dir / "mitbih_train.csv", dir / "mitbih_test.csv");
    } else {
      bundle = ingest_mitbih_csv(s.dataset_path, s.dataset_test_path);
    }
  } else if (s.dataset_format == "har-dir") {
    bundle = ingest_har_dir(s.dataset_path);
  } else {
    throw ConfigError("unknown dataset format '" + s.dataset_format + "'");
  }
  if (s.znormalize_data) bundle = znormalize(std::move(bundle));
  return bundle;
}

fs::path resolve_output_dir(const ExperimentSpec& s) {
  if (!s.output_dir.empty()) return s.output_dir;
  if (const char* env = std::getenv("SUSL4TS_OUTPUT_DIR")) return env;
  throw ConfigError("no output directory: pass --out or set SUSL4TS_OUTPUT_DIR");
}

int resolve_jobs(const ExperimentSpec& s, bool jobs_given) {
  if (!jobs_given) {
    if (const char* env = std::getenv("SUSL4TS_THREADS")) return std::stoi(env);
  }
  return s.jobs;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

void write_metrics_csv(const fs::path& path, const EvalReport& report) {
  std::ofstream os(path);
  os << "accuracy,macro_f1,weighted_f1,n_samples\n";
  os << format_double(report.accuracy) << ',' << format_double(report.macro_f1) << ','
     << format_double(report.weighted_f1) << ',' << report.n_samples << "\n";
}

void write_matrix_csv(const fs::path& path, const std::vector<std::vector<int64_t>>& m) {
  std::ofstream os(path);
  for (const auto& row : m) {
    for (size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << row[j];
    os << "\n";
  }
}

void write_cluster_map_csv(const fs::path& path, const ClusterMap& map) {
  std::ofstream os(path);
  os << "cluster,target_class,credited\n";
  for (int c = 0; c < map.n_clusters(); ++c)
    os << c << ',' << map.target[static_cast<size_t>(c)] << ','
       << (map.credited[static_cast<size_t>(c)] ? 1 : 0) << "\n";
}

void write_report_txt(const fs::path& path, const DatasetBundle& bundle, const EvalReport& report) {
  std::ofstream os(path);
  os << "dataset: " << bundle.name << "\n";
  os << "samples: " << report.n_samples << "\n\n";
  os << "confusion (rows: truth, columns: mapped prediction)\n";
  size_t width = 8;
  for (const auto& name : bundle.class_names) width = std::max(width, name.size() + 2);
  os << std::string(width, ' ');
  for (const auto& name : bundle.class_names) os << name << std::string(width - name.size(), ' ');
  os << "\n";
  for (size_t t = 0; t < report.confusion_mapped.size(); ++t) {
    const std::string& name = bundle.class_names[t];
    os << name << std::string(width - name.size(), ' ');
    for (int64_t v : report.confusion_mapped[t]) {
      const std::string cell = std::to_string(v);
      os << cell << std::string(width - cell.size(), ' ');
    }
    os << "\n";
  }
  os << "\naccuracy:    " << format_double(report.accuracy) << "\n";
  os << "macro_f1:    " << format_double(report.macro_f1) << "\n";
  os << "weighted_f1: " << format_double(report.weighted_f1) << "\n";
}

std::vector<SeriesSample> const& pick_split(const DatasetBundle& bundle, const RegimeSpec& regime,
                                            const std::string& split, RegimeSplit& storage) {
  if (split == "test") return bundle.test;
  if (split == "validation") {
    storage = build_regime(bundle, regime);
    return storage.validation;
  }
  if (split == "train") return bundle.train;
  throw ConfigError("unknown split '" + split + "' (expected test, validation or train)");
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_ingest(const ExperimentSpec& spec, const std::string& output_prefix) {
  DatasetBundle bundle;
  {
    ExperimentSpec raw = spec;
    raw.znormalize_data = false;  // bundles hold raw values; scaling is a run-time step
    bundle = load_dataset(raw);
  }
  save_bundle(bundle, output_prefix);
  std::cout << "bundle '" << bundle.name << "': " << bundle.train.size() << " train / " << bundle.test.size()
            << " test samples, " << bundle.channels << "x" << bundle.length << ", " << bundle.n_classes()
            << " classes\n";
  const auto train_counts = bundle.class_counts(bundle.train);
  const auto test_counts = bundle.class_counts(bundle.test);
  for (int c = 0; c < bundle.n_classes(); ++c)
    std::cout << "  " << bundle.class_names[static_cast<size_t>(c)] << ": " << train_counts[static_cast<size_t>(c)]
              << " / " << test_counts[static_cast<size_t>(c)] << "\n";
  return kExitOk;
}

int cmd_train(const ExperimentSpec& spec) {
  const fs::path out = resolve_output_dir(spec);
  const DatasetBundle bundle = load_dataset(spec);
  const RegimeSpec regime = regime_from(spec);
  const TrainConfig train = train_from(spec);

  echo_spec(spec, out);
  const FitResult result = fit(bundle, regime, model_from(spec), train);
  write_history_csv(out / "history.csv", result.history);
  save_checkpoint(out / "checkpoint.ckpt", result.model, result.best_params);

  if (result.diverged) {
    std::cerr << "training diverged: " << result.diagnostic << "\n";
    std::cerr << "last good checkpoint and history written to " << out << "\n";
    return kExitDivergence;
  }
  std::cout << "best validation accuracy " << format_double(result.best_val_accuracy) << " at epoch "
            << result.best_epoch << "; artifacts in " << out << "\n";
  return kExitOk;
}

int cmd_eval(const ExperimentSpec& spec, const std::string& run_dir, const std::string& checkpoint_path) {
  ExperimentSpec resolved = spec;
  fs::path ckpt = checkpoint_path;
  if (!run_dir.empty()) {
    ExperimentSpec from_run;
    load_spec_file(from_run, fs::path(run_dir) / "resolved.cfg");
    from_run.output_dir = spec.output_dir;
    from_run.split = spec.split;
    if (!spec.dataset_path.empty()) {
      from_run.dataset_path = spec.dataset_path;
      from_run.dataset_format = spec.dataset_format;
      from_run.dataset_test_path = spec.dataset_test_path;
    }
    resolved = from_run;
    if (ckpt.empty()) ckpt = fs::path(run_dir) / "checkpoint.ckpt";
  }
  if (ckpt.empty()) throw ConfigError("eval needs --run or --checkpoint");

  const fs::path out = resolve_output_dir(resolved);
  const DatasetBundle bundle = load_dataset(resolved);
  const RegimeSpec regime = regime_from(resolved);
  const Checkpoint checkpoint = load_checkpoint(ckpt);

  RegimeSplit storage;
  const auto& samples = pick_split(bundle, regime, resolved.split, storage);
  const EvalReport report =
      evaluate(checkpoint.params, checkpoint.config, samples, regime.visible_classes(bundle.n_classes()));

  echo_spec(resolved, out);
  write_metrics_csv(out / "metrics.csv", report);
  write_matrix_csv(out / "confusion_raw.csv", report.confusion);
  write_matrix_csv(out / "confusion_mapped.csv", report.confusion_mapped);
  write_cluster_map_csv(out / "cluster_map.csv", report.cluster_map);
  write_report_txt(out / "report.txt", bundle, report);
  std::cout << "accuracy " << format_double(report.accuracy) << ", macro f1 " << format_double(report.macro_f1)
            << ", weighted f1 " << format_double(report.weighted_f1) << " on " << report.n_samples << " "
            << resolved.split << " samples; report in " << out << "\n";
  return kExitOk;
}

int cmd_search(const ExperimentSpec& spec, bool jobs_given) {
  const fs::path out = resolve_output_dir(spec);
  const DatasetBundle bundle = load_dataset(spec);
  const RegimeSpec regime = regime_from(spec);

  SearchOptions opts;
  opts.n_trials = spec.trials;
  opts.epochs = spec.epochs;
  opts.batch_size = spec.batch_size;
  opts.lambda_step = spec.lambda_step;
  opts.lambda_max = spec.lambda_max;
  opts.micro_batch = spec.micro_batch;
  opts.seed = spec.train_seed;
  opts.jobs = resolve_jobs(spec, jobs_given);
  opts.prune = spec.prune;

  echo_spec(spec, out);
  const SearchOutcome outcome =
      run_search(bundle, regime, SearchSpace::defaults(), variant_from_string(spec.variant), opts,
                 [](const TrialResult& t) {
                   std::cout << "trial " << t.index << ": val_accuracy " << format_double(t.val_accuracy) << " ("
                             << to_string(t.status) << ")\n";
                 });
  write_search_log(out / "trials.jsonl", outcome.ranked);
  save_checkpoint(out / "best_checkpoint.ckpt", outcome.best_model, outcome.best_params);
  if (outcome.best.test_metrics) {
    std::ofstream os(out / "best_metrics.csv");
    os << "accuracy,macro_f1,weighted_f1\n";
    os << format_double(outcome.best.test_metrics->accuracy) << ','
       << format_double(outcome.best.test_metrics->macro_f1) << ','
       << format_double(outcome.best.test_metrics->weighted_f1) << "\n";
  }
  std::cout << "best trial " << outcome.best.index << " with validation accuracy "
            << format_double(outcome.best.val_accuracy);
  if (outcome.best.test_metrics)
    std::cout << ", test accuracy " << format_double(outcome.best.test_metrics->accuracy);
  std::cout << "; artifacts in " << out << "\n";
  return kExitOk;
}

int cmd_embed(const ExperimentSpec& spec, const std::string& run_dir, const std::string& checkpoint_path,
              const std::string& out_file) {
  ExperimentSpec resolved = spec;
  fs::path ckpt = checkpoint_path;
  if (!run_dir.empty()) {
    ExperimentSpec from_run;
    load_spec_file(from_run, fs::path(run_dir) / "resolved.cfg");
    from_run.split = spec.split;
    if (!spec.dataset_path.empty()) {
      from_run.dataset_path = spec.dataset_path;
      from_run.dataset_format = spec.dataset_format;
      from_run.dataset_test_path = spec.dataset_test_path;
    }
    resolved = from_run;
    if (ckpt.empty()) ckpt = fs::path(run_dir) / "checkpoint.ckpt";
  }
  if (ckpt.empty()) throw ConfigError("embed needs --run or --checkpoint");

  const DatasetBundle bundle = load_dataset(resolved);
  const RegimeSpec regime = regime_from(resolved);
  const Checkpoint checkpoint = load_checkpoint(ckpt);
  RegimeSplit storage;
  const auto& samples = pick_split(bundle, regime, resolved.split, storage);
  const auto rows = export_embeddings(checkpoint.params, checkpoint.config, samples);
  write_embeddings_csv(out_file, rows);
  std::cout << rows.size() << " embeddings of width " << checkpoint.config.latent_dim << " written to " << out_file
            << "\n";
  return kExitOk;
}

int cmd_sample(const std::string& checkpoint_path, int cls, int count, uint64_t seed, const std::string& out_file) {
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  const Array out = sample_class(checkpoint.params, checkpoint.config, cls, count, seed);
  std::ofstream os(out_file);
  if (!os) throw DataError("cannot write " + out_file);
  os << "sample,channel";
  for (int i = 0; i < checkpoint.config.length; ++i) os << ",t_" << i;
  os << "\n";
  const int ch = checkpoint.config.channels, len = checkpoint.config.length;
  for (int s = 0; s < count; ++s)
    for (int c = 0; c < ch; ++c) {
      os << s << ',' << c;
      for (int i = 0; i < len; ++i) os << ',' << format_double(out[(static_cast<int64_t>(s) * ch + c) * len + i]);
      os << "\n";
    }
  std::cout << count << " series for class " << cls << " written to " << out_file << "\n";
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_file) {
  struct Row {
    std::string dir, regime;
    double accuracy = 0, macro = 0, weighted = 0;
  };
  std::vector<Row> rows;
  for (const auto& dir : run_dirs) {
    Row row;
    row.dir = fs::path(dir).filename().string();
    ExperimentSpec spec;
    load_spec_file(spec, fs::path(dir) / "resolved.cfg");
    std::ostringstream regime;
    regime << "labeled " << format_double(spec.labeled_fraction * 100.0) << "%";
    if (!spec.hidden_classes.empty()) regime << ", hidden {" << spec.hidden_classes << "}";
    if (spec.augmented > 0) regime << ", +" << spec.augmented << " slots";
    row.regime = regime.str();

    std::ifstream metrics(fs::path(dir) / "metrics.csv");
    if (!metrics) throw DataError("no metrics.csv in " + dir);
    std::string header, data;
    std::getline(metrics, header);
    std::getline(metrics, data);
    std::stringstream ss(data);
    std::string tok;
    std::getline(ss, tok, ',');
    row.accuracy = std::stod(tok);
    std::getline(ss, tok, ',');
    row.macro = std::stod(tok);
    std::getline(ss, tok, ',');
    row.weighted = std::stod(tok);
    rows.push_back(std::move(row));
  }

  std::ostringstream table;
  size_t name_w = 8, regime_w = 8;
  for (const auto& r : rows) {
    name_w = std::max(name_w, r.dir.size() + 2);
    regime_w = std::max(regime_w, r.regime.size() + 2);
  }
  auto pad = [](const std::string& s, size_t w) { return s + std::string(w - s.size(), ' '); };
  table << pad("run", name_w) << pad("regime", regime_w) << "accuracy  macro_f1  weighted_f1\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%8.4f  %8.4f  %11.4f", r.accuracy, r.macro, r.weighted);
    table << pad(r.dir, name_w) << pad(r.regime, regime_w) << buf << "\n";
  }
  std::cout << table.str();
  if (!out_file.empty()) {
    std::ofstream os(out_file);
    os << table.str();
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-mixture generative modeling for time series classification across labeling regimes"};
  app.require_subcommand(1);

  ExperimentSpec spec;
  std::string config_file, output_prefix, run_dir, checkpoint_path, out_file;
  std::vector<std::string> report_dirs;
  bool print_config = false;
  int sample_cls = 0, sample_count = 8;
  uint64_t sample_seed = 0;
  bool jobs_given = false;

  auto add_dataset_flags = [&](CLI::App* cmd) {
    cmd->add_option("--input,--bundle", spec.dataset_path, "dataset path (bundle prefix or raw file/dir)");
    cmd->add_option("--format", spec.dataset_format, "ucr-tsv | mitbih-csv | har-dir | bundle");
    cmd->add_option("--test-input", spec.dataset_test_path, "second raw file for two-file formats");
    cmd->add_flag("--no-znormalize", [&spec](int64_t) { spec.znormalize_data = false; },
                  "skip per-channel standardization");
  };
  auto add_regime_flags = [&](CLI::App* cmd) {
    cmd->add_option("--labeled-fraction", spec.labeled_fraction, "fraction of labels kept per visible class");
    cmd->add_option("--hidden", spec.hidden_classes, "comma separated class indices with no labels at all");
    cmd->add_option("--augmented", spec.augmented, "extra label-free output slots");
    cmd->add_option("--regime-seed", spec.regime_seed, "seed for the split");
  };
  auto add_model_flags = [&](CLI::App* cmd) {
    cmd->add_option("--variant", spec.variant, "conv | mlp");
    cmd->add_option("--latent", spec.latent_dim, "latent width");
    cmd->add_option("--layers", spec.layers, "trunk depth (1-3)");
    cmd->add_option("--filters", spec.filters, "conv filters");
    cmd->add_option("--units", spec.units, "dense units");
    cmd->add_option("--kernel", spec.kernel_size, "odd conv kernel size");
  };
  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--lr", spec.lr, "peak learning rate");
    cmd->add_option("--epochs", spec.epochs, "training epochs");
    cmd->add_option("--batch-size", spec.batch_size, "samples per side per batch");
    cmd->add_option("--alpha", spec.alpha, "classification term weight");
    cmd->add_option("--gamma", spec.gamma, "entropy regularizer weight");
    cmd->add_option("--lambda-step", spec.lambda_step, "per-epoch regularizer ramp");
    cmd->add_option("--lambda-max", spec.lambda_max, "regularizer ramp cap");
    cmd->add_option("--weight-decay", spec.weight_decay, "decoupled decay coefficient");
    cmd->add_option("--clip", spec.clip, "global gradient norm threshold");
    cmd->add_option("--micro-batch", spec.micro_batch, "tape chunk size (memory knob)");
    cmd->add_option("--seed", spec.train_seed, "training seed");
    cmd->add_option("--config", config_file, "key=value config file (flags override)");
    cmd->add_flag("--print-config", print_config, "print the resolved configuration and exit");
  };

  CLI::App* ingest = app.add_subcommand("ingest", "parse a raw dataset into a canonical bundle");
  add_dataset_flags(ingest);
  ingest->add_option("--output", output_prefix, "bundle prefix to write")->required();

  CLI::App* train = app.add_subcommand("train", "fit a model under a labeling regime");
  add_dataset_flags(train);
  add_regime_flags(train);
  add_model_flags(train);
  add_train_flags(train);
  train->add_option("--out", spec.output_dir, "output directory");

  CLI::App* eval = app.add_subcommand("eval", "score a checkpoint on a split");
  add_dataset_flags(eval);
  add_regime_flags(eval);
  eval->add_option("--run", run_dir, "training output directory (reads resolved.cfg + checkpoint.ckpt)");
  eval->add_option("--checkpoint", checkpoint_path, "explicit checkpoint file");
  eval->add_option("--split", spec.split, "test | validation | train");
  eval->add_option("--out", spec.output_dir, "output directory");

  CLI::App* search = app.add_subcommand("search", "random hyperparameter search");
  add_dataset_flags(search);
  add_regime_flags(search);
  add_train_flags(search);
  search->add_option("--variant", spec.variant, "conv | mlp");
  search->add_option("--trials", spec.trials, "number of trials");
  search->add_option("--jobs", spec.jobs, "parallel trial workers")->each([&jobs_given](const std::string&) {
    jobs_given = true;
  });
  search->add_flag("--prune", spec.prune, "stop weak trials at checkpoint epochs");
  search->add_option("--out", spec.output_dir, "output directory");

  CLI::App* embed = app.add_subcommand("embed", "export latent posterior means");
  add_dataset_flags(embed);
  add_regime_flags(embed);
  embed->add_option("--run", run_dir, "training output directory");
  embed->add_option("--checkpoint", checkpoint_path, "explicit checkpoint file");
  embed->add_option("--split", spec.split, "test | validation | train");
  embed->add_option("--out", out_file, "embeddings csv")->required();

  CLI::App* sample = app.add_subcommand("sample", "draw series from a class prior");
  sample->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  sample->add_option("--class", sample_cls, "class index")->required();
  sample->add_option("--count", sample_count, "number of series");
  sample->add_option("--seed", sample_seed, "sampling seed");
  sample->add_option("--out", out_file, "output csv")->required();

  CLI::App* report = app.add_subcommand("report", "tabulate several eval outputs side by side");
  report->add_option("runs", report_dirs, "eval output directories")->required();
  report->add_option("--out", out_file, "optional file for the rendered table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!config_file.empty()) {
      // file first, then flags override
      ExperimentSpec merged;
      load_spec_file(merged, config_file);
      // replay command line values on top of the file
      ExperimentSpec flag_defaults;
      for (const auto& [key, value] : spec_items(spec)) {
        std::string default_value;
        for (const auto& [dkey, dvalue] : spec_items(flag_defaults))
          if (dkey == key) default_value = dvalue;
        if (value != default_value) apply_spec_item(merged, key, value);
      }
      spec = merged;
    }
    if (print_config) {
      print_spec(std::cout, spec);
      return kExitOk;
    }

    if (app.got_subcommand(ingest)) return cmd_ingest(spec, output_prefix);
    if (app.got_subcommand(train)) return cmd_train(spec);
    if (app.got_subcommand(eval)) return cmd_eval(spec, run_dir, checkpoint_path);
    if (app.got_subcommand(search)) return cmd_search(spec, jobs_given);
    if (app.got_subcommand(embed)) return cmd_embed(spec, run_dir, checkpoint_path, out_file);
    if (app.got_subcommand(sample)) return cmd_sample(checkpoint_path, sample_cls, sample_count, sample_seed, out_file);
    if (app.got_subcommand(report)) return cmd_report(report_dirs, out_file);
    std::cerr << "no command\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
