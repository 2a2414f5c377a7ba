#include "susl/trainer.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

#include "susl/errors.hpp"
#include "susl/rng.hpp"

namespace susl {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lambda_step > 0.0 && lambda_step <= 1.0)) throw ConfigError("lambda_step must lie in (0, 1]");
  if (!(lambda_max >= 0.0 && lambda_max <= 1.0)) throw ConfigError("lambda_max must lie in [0, 1]");
  if (micro_batch < 1) throw ConfigError("micro_batch must be >= 1");
  weights.validate();
}

double lambda_at(int epoch, double step, double max_value) {
  if (epoch < 0) throw ConfigError("epoch must be >= 0");
  return std::min(max_value, step * static_cast<double>(epoch));
}

double cosine_lr(int64_t step, int64_t total_steps, double lr0) {
  if (step < 0 || step > total_steps || total_steps < 1) throw ConfigError("cosine step outside [0, total]");
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return std::max(0.0, 0.5 * lr0 * (1.0 + std::cos(phase)));
}

AdamState init_adam(const Parameters& params) {
  AdamState s;
  params.for_each([&s](const std::string&, const Array& a) {
    s.m.emplace_back(a.shape());
    s.v.emplace_back(a.shape());
  });
  return s;
}

void adam_step(Parameters& params, AdamState& state, const std::vector<Array>& grads, double lr,
               const TrainConfig& cfg) {
  std::vector<std::string> names;
  std::vector<Array*> tensors;
  params.for_each([&](const std::string& name, Array& a) {
    names.push_back(name);
    tensors.push_back(&a);
  });
  if (grads.size() != tensors.size()) throw ConfigError("gradient list does not match the parameter list");

  double sq_norm = 0.0;
  for (size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].same_shape(*tensors[i]))
      throw ConfigError("gradient for " + names[i] + " has shape " + shape_str(grads[i].shape()));
    for (int64_t j = 0; j < grads[i].size(); ++j) {
      const double g = grads[i][j];
      if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in " + names[i], names[i], -1);
      sq_norm += g * g;
    }
  }
  const double norm = std::sqrt(sq_norm);
  const double clip_scale = norm > cfg.weights.grad_clip ? cfg.weights.grad_clip / norm : 1.0;

  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const double decay = cfg.weights.weight_decay;

  for (size_t i = 0; i < tensors.size(); ++i) {
    Array& theta = *tensors[i];
    Array& m = state.m[i];
    Array& v = state.v[i];
    const bool decays = Parameters::decays(names[i]);
    for (int64_t j = 0; j < theta.size(); ++j) {
      const double g = grads[i][j] * clip_scale;
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      const double update = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.adam_eps);
      const double old = theta[j];
      theta[j] = old - lr * update - (decays ? lr * decay * old : 0.0);
    }
  }
}

namespace {

Array draw_noise(Rng& rng, int n, int d) {
  Array a({n, d});
  for (int64_t i = 0; i < a.size(); ++i) a[i] = rng.normal();
  return a;
}

struct ChunkAccumulator {
  std::vector<Array> grads;
  LossBreakdown parts;

  explicit ChunkAccumulator(const Parameters& p) {
    p.for_each([this](const std::string&, const Array& a) { grads.emplace_back(a.shape()); });
  }
};

}  // namespace

FitResult fit(const DatasetBundle& bundle, const RegimeSpec& regime, ModelConfig model, const TrainConfig& train,
              const EpochCallback& on_epoch) {
  model.channels = bundle.channels;
  model.length = bundle.length;
  model.n_known_classes = bundle.n_classes();
  model.n_augmented_classes = regime.n_augmented;
  model.validate();
  train.validate();

  const RegimeSplit split = build_regime(bundle, regime);
  const std::set<int> visible = regime.visible_classes(model.n_known_classes);
  const int d = model.latent_dim;

  FitResult result;
  result.model = model;
  Parameters params = init_parameters(model, train.seed);
  AdamState adam = init_adam(params);
  Rng noise_rng = Rng(train.seed).derive("latent_noise");

  const int n_labeled = static_cast<int>(split.labeled.size());
  const int n_unlabeled = static_cast<int>(split.unlabeled.size());
  if (n_labeled == 0 && n_unlabeled == 0) throw ConfigError("regime left no training data");
  const int major = std::max(n_labeled, n_unlabeled);
  const int64_t steps_per_epoch = (major + train.batch_size - 1) / train.batch_size;
  const int64_t total_steps = steps_per_epoch * train.epochs;

  int64_t step = 0;
  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    LossWeights weights = train.weights;
    weights.entropy_anneal = lambda_at(epoch, train.lambda_step, train.lambda_max);

    LossBreakdown epoch_loss;
    const double epoch_lr = cosine_lr(step, total_steps, train.lr);
    int64_t n_batches = 0;
    bool failed = false;

    const auto batches = make_batches(n_labeled, n_unlabeled, train.batch_size, train.seed, epoch);
    for (size_t bi = 0; bi < batches.size() && !failed; ++bi) {
      const MiniBatch& batch = batches[bi];
      const double lr = cosine_lr(step, total_steps, train.lr);
      const int nl = static_cast<int>(batch.labeled.size());
      const int nu = static_cast<int>(batch.unlabeled.size());
      const Array noise_l = nl > 0 ? draw_noise(noise_rng, nl, d) : Array();
      const Array noise_u = nu > 0 ? draw_noise(noise_rng, nu, d) : Array();

      ChunkAccumulator acc(params);
      try {
        // The two sides are chunked independently; divisors keep the per-side
        // means exact regardless of the chunking.
        for (int start = 0; start < nl; start += train.micro_batch) {
          const int count = std::min(train.micro_batch, nl - start);
          LabeledBatch lb;
          std::vector<int> idx(batch.labeled.begin() + start, batch.labeled.begin() + start + count);
          lb.x = make_input_batch(split.labeled, idx, model.channels, model.length);
          lb.labels.reserve(static_cast<size_t>(count));
          for (int i : idx) lb.labels.push_back(*split.labeled[static_cast<size_t>(i)].label);
          lb.noise = Array({count, d}, std::vector<double>(noise_l.data() + static_cast<int64_t>(start) * d,
                                                           noise_l.data() + static_cast<int64_t>(start + count) * d));
          Tape t;
          const ParamNodes pn = stage_parameters(t, params);
          const ObjectiveNodes nodes = build_objective(t, pn, model, &lb, nullptr, weights, nl, 0);
          t.backward(nodes.objective);
          const auto ids = pn.all();
          for (size_t i = 0; i < ids.size(); ++i) accumulate(acc.grads[i], t.grad(ids[i]));
          acc.parts.labeled_elbo += t.value(nodes.labeled_elbo).item();
          acc.parts.classification += t.value(nodes.classification).item();
        }
        for (int start = 0; start < nu; start += train.micro_batch) {
          const int count = std::min(train.micro_batch, nu - start);
          UnlabeledBatch ub;
          std::vector<int> idx(batch.unlabeled.begin() + start, batch.unlabeled.begin() + start + count);
          ub.x = make_input_batch(split.unlabeled, idx, model.channels, model.length);
          ub.noise = Array({count, d}, std::vector<double>(noise_u.data() + static_cast<int64_t>(start) * d,
                                                           noise_u.data() + static_cast<int64_t>(start + count) * d));
          Tape t;
          const ParamNodes pn = stage_parameters(t, params);
          const ObjectiveNodes nodes = build_objective(t, pn, model, nullptr, &ub, weights, 0, nu);
          t.backward(nodes.objective);
          const auto ids = pn.all();
          for (size_t i = 0; i < ids.size(); ++i) accumulate(acc.grads[i], t.grad(ids[i]));
          acc.parts.unlabeled_elbo += t.value(nodes.unlabeled_elbo).item();
          acc.parts.entropy += t.value(nodes.entropy).item();
        }
        adam_step(params, adam, acc.grads, lr, train);
      } catch (const NumericError& e) {
        result.diverged = true;
        result.diagnostic = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi) + ": " + e.what();
        failed = true;
      } catch (const DivergenceError& e) {
        result.diverged = true;
        result.diagnostic = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi) + ", parameter " +
                            e.parameter + ": non-finite gradient";
        failed = true;
      }
      if (failed) break;

      acc.parts.weight_decay = weight_decay_value(params, weights.weight_decay);
      acc.parts.total = acc.parts.labeled_elbo + acc.parts.classification + acc.parts.unlabeled_elbo +
                        acc.parts.entropy + acc.parts.weight_decay;
      epoch_loss.labeled_elbo += acc.parts.labeled_elbo;
      epoch_loss.classification += acc.parts.classification;
      epoch_loss.unlabeled_elbo += acc.parts.unlabeled_elbo;
      epoch_loss.entropy += acc.parts.entropy;
      epoch_loss.weight_decay = acc.parts.weight_decay;
      ++n_batches;
      ++step;
    }
    if (result.diverged) break;

    const double inv = n_batches > 0 ? 1.0 / static_cast<double>(n_batches) : 0.0;
    epoch_loss.labeled_elbo *= inv;
    epoch_loss.classification *= inv;
    epoch_loss.unlabeled_elbo *= inv;
    epoch_loss.entropy *= inv;
    epoch_loss.total = epoch_loss.labeled_elbo + epoch_loss.classification + epoch_loss.unlabeled_elbo +
                       epoch_loss.entropy + epoch_loss.weight_decay;

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss;
    stats.lambda = lambda_at(epoch, train.lambda_step, train.lambda_max);
    stats.lr = epoch_lr;
    stats.val_accuracy =
        split.validation.empty() ? 0.0 : evaluate(params, model, split.validation, visible).accuracy;
    result.history.push_back(stats);

    if (stats.val_accuracy >= result.best_val_accuracy) {
      result.best_val_accuracy = stats.val_accuracy;
      result.best_epoch = epoch;
      result.best_params = params;
    }
    if (on_epoch && !on_epoch(stats, params)) break;
  }

  if (result.best_epoch < 0) {
    result.best_params = params;  // nothing completed; hand back the last good state
    result.best_val_accuracy = 0.0;
  }
  return result;
}

namespace {
std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}
}  // namespace

void write_history_csv(const std::filesystem::path& path, std::span<const EpochStats> history) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "epoch,total,labeled_elbo,classification,unlabeled_elbo,entropy,weight_decay,lambda,lr,val_accuracy\n";
  for (const auto& e : history) {
    os << e.epoch << ',' << format_double(e.loss.total) << ',' << format_double(e.loss.labeled_elbo) << ','
       << format_double(e.loss.classification) << ',' << format_double(e.loss.unlabeled_elbo) << ','
       << format_double(e.loss.entropy) << ',' << format_double(e.loss.weight_decay) << ','
       << format_double(e.lambda) << ',' << format_double(e.lr) << ',' << format_double(e.val_accuracy) << "\n";
  }
}

}  // namespace susl
