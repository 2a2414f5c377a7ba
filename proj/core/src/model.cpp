#include "susl/model.hpp"

#include <cmath>

#include "susl/errors.hpp"
#include "susl/rng.hpp"

namespace susl {

std::string to_string(Variant v) { return v == Variant::conv ? "conv" : "mlp"; }

Variant variant_from_string(const std::string& s) {
  if (s == "conv") return Variant::conv;
  if (s == "mlp") return Variant::mlp;
  throw ConfigError("unknown variant '" + s + "' (expected conv or mlp)");
}

std::vector<int> ModelConfig::encoder_lengths() const {
  std::vector<int> lengths{length};
  for (int i = 0; i < layers; ++i) {
    const int next = conv1d_output_length(lengths.back(), kernel_size, 2, padding());
    lengths.push_back(next);
  }
  return lengths;
}

int ModelConfig::feature_dim() const {
  if (variant == Variant::mlp) return units;
  return filters * encoder_lengths().back();
}

void ModelConfig::validate() const {
  if (channels < 1 || length < 1) throw ConfigError("input size must be positive");
  if (n_known_classes < 1) throw ConfigError("need at least one known class");
  if (n_augmented_classes < 0) throw ConfigError("augmented class count must be >= 0");
  if (total_classes() < 1) throw ConfigError("total class count must be >= 1");
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (layers < 1 || layers > 3) throw ConfigError("layers must be in 1..3");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("kernel_size must be odd");
  if (variant == Variant::conv && filters < 1) throw ConfigError("filters must be >= 1");
  if (variant == Variant::mlp && units < 1) throw ConfigError("units must be >= 1");
  for (int l : encoder_lengths())
    if (l < 1) throw ConfigError("conv stack shrinks the series to nothing");
}

namespace {

struct TensorRef {
  std::string name;
  Array* array;
};

std::vector<TensorRef> tensor_refs(Parameters& p) {
  std::vector<TensorRef> refs;
  for (size_t i = 0; i < p.trunk_w.size(); ++i) refs.push_back({"trunk_w" + std::to_string(i), &p.trunk_w[i]});
  for (size_t i = 0; i < p.trunk_b.size(); ++i) refs.push_back({"trunk_b" + std::to_string(i), &p.trunk_b[i]});
  refs.push_back({"cls_w", &p.cls_w});
  refs.push_back({"cls_b", &p.cls_b});
  refs.push_back({"enc_mean_w_feat", &p.enc_mean_w_feat});
  refs.push_back({"enc_mean_w_class", &p.enc_mean_w_class});
  refs.push_back({"enc_mean_b", &p.enc_mean_b});
  refs.push_back({"enc_logvar_w_feat", &p.enc_logvar_w_feat});
  refs.push_back({"enc_logvar_w_class", &p.enc_logvar_w_class});
  refs.push_back({"enc_logvar_b", &p.enc_logvar_b});
  refs.push_back({"dec_in_w", &p.dec_in_w});
  refs.push_back({"dec_in_b", &p.dec_in_b});
  for (size_t i = 0; i < p.dec_w.size(); ++i) refs.push_back({"dec_w" + std::to_string(i), &p.dec_w[i]});
  for (size_t i = 0; i < p.dec_b.size(); ++i) refs.push_back({"dec_b" + std::to_string(i), &p.dec_b[i]});
  refs.push_back({"out_w", &p.out_w});
  refs.push_back({"out_b", &p.out_b});
  refs.push_back({"prior_mean", &p.prior_mean});
  refs.push_back({"prior_logvar", &p.prior_logvar});
  return refs;
}

}  // namespace

void Parameters::for_each(const std::function<void(const std::string&, Array&)>& fn) {
  for (auto& ref : tensor_refs(*this)) fn(ref.name, *ref.array);
}

void Parameters::for_each(const std::function<void(const std::string&, const Array&)>& fn) const {
  for (auto& ref : tensor_refs(const_cast<Parameters&>(*this))) fn(ref.name, *ref.array);
}

int64_t Parameters::count() const {
  int64_t n = 0;
  for_each([&n](const std::string&, const Array& a) { n += a.size(); });
  return n;
}

bool Parameters::decays(const std::string& name) { return name.rfind("prior_", 0) != 0; }

namespace {

Array he_init(std::vector<int> shape, int fan_in, Rng& rng) {
  Array a(std::move(shape));
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < a.size(); ++i) a[i] = rng.normal(0.0, stddev);
  return a;
}

Array head_init(std::vector<int> shape, Rng& rng) {
  Array a(std::move(shape));
  for (int64_t i = 0; i < a.size(); ++i) a[i] = rng.normal(0.0, 0.02);
  return a;
}

}  // namespace

Parameters init_parameters(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng = Rng(seed).derive("params");
  const int C = cfg.total_classes();
  const int d = cfg.latent_dim;
  const int F = cfg.feature_dim();
  Parameters p;

  if (cfg.variant == Variant::conv) {
    for (int i = 0; i < cfg.layers; ++i) {
      const int in_ch = (i == 0) ? cfg.channels : cfg.filters;
      p.trunk_w.push_back(he_init({cfg.filters, in_ch, cfg.kernel_size}, in_ch * cfg.kernel_size, rng));
      p.trunk_b.push_back(Array({cfg.filters}));
    }
  } else {
    for (int i = 0; i < cfg.layers; ++i) {
      const int in_dim = (i == 0) ? cfg.channels * cfg.length : cfg.units;
      p.trunk_w.push_back(he_init({in_dim, cfg.units}, in_dim, rng));
      p.trunk_b.push_back(Array({cfg.units}));
    }
  }

  p.cls_w = head_init({F, C}, rng);
  p.cls_b = Array({C});
  p.enc_mean_w_feat = head_init({F, d}, rng);
  p.enc_mean_w_class = head_init({C, d}, rng);
  p.enc_mean_b = Array({d});
  p.enc_logvar_w_feat = head_init({F, d}, rng);
  p.enc_logvar_w_class = head_init({C, d}, rng);
  p.enc_logvar_b = Array({d});

  if (cfg.variant == Variant::conv) {
    const int seed_len = cfg.encoder_lengths().back();
    p.dec_in_w = he_init({d, cfg.filters * seed_len}, d, rng);
    p.dec_in_b = Array({cfg.filters * seed_len});
    for (int i = 0; i < cfg.layers; ++i) {
      p.dec_w.push_back(he_init({cfg.filters, cfg.filters, cfg.kernel_size}, cfg.filters * cfg.kernel_size, rng));
      p.dec_b.push_back(Array({cfg.filters}));
    }
    p.out_w = head_init({cfg.channels, cfg.filters, 1}, rng);
    p.out_b = Array({cfg.channels});
  } else {
    p.dec_in_w = he_init({d, cfg.units}, d, rng);
    p.dec_in_b = Array({cfg.units});
    for (int i = 0; i + 1 < cfg.layers; ++i) {
      p.dec_w.push_back(he_init({cfg.units, cfg.units}, cfg.units, rng));
      p.dec_b.push_back(Array({cfg.units}));
    }
    p.out_w = head_init({cfg.units, cfg.channels * cfg.length}, rng);
    p.out_b = Array({cfg.channels * cfg.length});
  }

  p.prior_mean = Array({C, d});
  Rng prior_rng = Rng(seed).derive("prior");
  for (int64_t i = 0; i < p.prior_mean.size(); ++i) p.prior_mean[i] = 0.05 * prior_rng.normal();
  p.prior_logvar = Array({C, d});
  return p;
}

int64_t parameter_count(const ModelConfig& cfg) { return init_parameters(cfg, 0).count(); }

std::vector<Tape::NodeId> ParamNodes::all() const {
  std::vector<Tape::NodeId> ids;
  for (auto id : trunk_w) ids.push_back(id);
  for (auto id : trunk_b) ids.push_back(id);
  ids.insert(ids.end(), {cls_w, cls_b, enc_mean_w_feat, enc_mean_w_class, enc_mean_b, enc_logvar_w_feat,
                         enc_logvar_w_class, enc_logvar_b, dec_in_w, dec_in_b});
  for (auto id : dec_w) ids.push_back(id);
  for (auto id : dec_b) ids.push_back(id);
  ids.insert(ids.end(), {out_w, out_b, prior_mean, prior_logvar});
  return ids;
}

ParamNodes stage_parameters(Tape& t, const Parameters& p) {
  ParamNodes n;
  for (const auto& w : p.trunk_w) n.trunk_w.push_back(t.leaf(w));
  for (const auto& b : p.trunk_b) n.trunk_b.push_back(t.leaf(b));
  n.cls_w = t.leaf(p.cls_w);
  n.cls_b = t.leaf(p.cls_b);
  n.enc_mean_w_feat = t.leaf(p.enc_mean_w_feat);
  n.enc_mean_w_class = t.leaf(p.enc_mean_w_class);
  n.enc_mean_b = t.leaf(p.enc_mean_b);
  n.enc_logvar_w_feat = t.leaf(p.enc_logvar_w_feat);
  n.enc_logvar_w_class = t.leaf(p.enc_logvar_w_class);
  n.enc_logvar_b = t.leaf(p.enc_logvar_b);
  n.dec_in_w = t.leaf(p.dec_in_w);
  n.dec_in_b = t.leaf(p.dec_in_b);
  for (const auto& w : p.dec_w) n.dec_w.push_back(t.leaf(w));
  for (const auto& b : p.dec_b) n.dec_b.push_back(t.leaf(b));
  n.out_w = t.leaf(p.out_w);
  n.out_b = t.leaf(p.out_b);
  n.prior_mean = t.leaf(p.prior_mean);
  n.prior_logvar = t.leaf(p.prior_logvar);
  return n;
}

Tape::NodeId features_node(Tape& t, const ParamNodes& p, const ModelConfig& cfg, Tape::NodeId x) {
  const int batch = t.value(x).dim(0);
  if (cfg.variant == Variant::conv) {
    Tape::NodeId h = x;
    for (int i = 0; i < cfg.layers; ++i)
      h = t.relu(t.conv1d(h, p.trunk_w[static_cast<size_t>(i)], p.trunk_b[static_cast<size_t>(i)], 2, cfg.padding()));
    return t.reshape(h, {batch, cfg.feature_dim()});
  }
  Tape::NodeId h = t.reshape(x, {batch, cfg.channels * cfg.length});
  for (int i = 0; i < cfg.layers; ++i)
    h = t.relu(t.add(t.matmul(h, p.trunk_w[static_cast<size_t>(i)]), p.trunk_b[static_cast<size_t>(i)]));
  return h;
}

Tape::NodeId class_logits_node(Tape& t, const ParamNodes& p, const ModelConfig&, Tape::NodeId feat) {
  return t.add(t.matmul(feat, p.cls_w), p.cls_b);
}

GaussianNodes encode_node(Tape& t, const ParamNodes& p, const ModelConfig&, Tape::NodeId feat,
                          Tape::NodeId class_mix) {
  const auto head = [&](Tape::NodeId wf, Tape::NodeId wc, Tape::NodeId b) {
    return t.add(t.add(t.matmul(feat, wf), t.matmul(class_mix, wc)), b);
  };
  return {head(p.enc_mean_w_feat, p.enc_mean_w_class, p.enc_mean_b),
          head(p.enc_logvar_w_feat, p.enc_logvar_w_class, p.enc_logvar_b)};
}

GaussianNodes prior_node(Tape& t, const ParamNodes& p, Tape::NodeId class_mix) {
  return {t.matmul(class_mix, p.prior_mean), t.matmul(class_mix, p.prior_logvar)};
}

Tape::NodeId reparameterize_node(Tape& t, GaussianNodes g, Tape::NodeId noise) {
  return t.add(g.mean, t.mul(t.exp(t.scale(g.logvar, 0.5)), noise));
}

Tape::NodeId decode_node(Tape& t, const ParamNodes& p, const ModelConfig& cfg, Tape::NodeId z) {
  const int batch = t.value(z).dim(0);
  if (cfg.variant == Variant::conv) {
    const auto lengths = cfg.encoder_lengths();
    Tape::NodeId h = t.relu(t.add(t.matmul(z, p.dec_in_w), p.dec_in_b));
    h = t.reshape(h, {batch, cfg.filters, lengths.back()});
    int cur = lengths.back();
    for (int i = 0; i < cfg.layers; ++i) {
      const int target = lengths[static_cast<size_t>(cfg.layers - 1 - i)];
      const int natural = transposed_conv1d_output_length(cur, cfg.kernel_size, 2, cfg.padding(), 0);
      h = t.relu(t.transposed_conv1d(h, p.dec_w[static_cast<size_t>(i)], p.dec_b[static_cast<size_t>(i)], 2,
                                     cfg.padding(), target - natural));
      cur = target;
    }
    return t.conv1d(h, p.out_w, p.out_b, 1, 0);
  }
  Tape::NodeId h = t.relu(t.add(t.matmul(z, p.dec_in_w), p.dec_in_b));
  for (size_t i = 0; i < p.dec_w.size(); ++i) h = t.relu(t.add(t.matmul(h, p.dec_w[i]), p.dec_b[i]));
  Tape::NodeId out = t.add(t.matmul(h, p.out_w), p.out_b);
  return t.reshape(out, {batch, cfg.channels, cfg.length});
}

Array onehot_rows(std::span<const int> labels, int n_classes) {
  Array a({static_cast<int>(labels.size()), n_classes});
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes)
      throw ConfigError("class index " + std::to_string(labels[i]) + " out of range 0.." +
                        std::to_string(n_classes - 1));
    a[static_cast<int64_t>(i) * n_classes + labels[i]] = 1.0;
  }
  return a;
}

Array basis_row(int cls, int n_classes) {
  const int label[1] = {cls};
  return onehot_rows(label, n_classes);
}

namespace {

void check_input(const ModelConfig& cfg, const Array& x) {
  if (x.rank() != 2 || x.dim(0) != cfg.channels || x.dim(1) != cfg.length)
    throw ShapeError("input " + shape_str(x.shape()) + " does not match model input (" +
                     std::to_string(cfg.channels) + ", " + std::to_string(cfg.length) + ")");
}

Array as_batch_of_one(const ModelConfig& cfg, const Array& x) {
  check_input(cfg, x);
  return Array({1, cfg.channels, cfg.length}, std::vector<double>(x.data(), x.data() + x.size()));
}

std::vector<double> row_of(const Array& a, int row) {
  const int d = a.dim(1);
  const double* p = a.data() + static_cast<int64_t>(row) * d;
  return std::vector<double>(p, p + d);
}

}  // namespace

std::vector<double> classify(const Parameters& p, const ModelConfig& cfg, const Array& x) {
  Tape t;
  const ParamNodes pn = stage_parameters(t, p);
  const Tape::NodeId xb = t.leaf(as_batch_of_one(cfg, x));
  const Tape::NodeId probs = t.softmax(class_logits_node(t, pn, cfg, features_node(t, pn, cfg, xb)), 1);
  return row_of(t.value(probs), 0);
}

std::pair<std::vector<double>, std::vector<double>> encode(const Parameters& p, const ModelConfig& cfg,
                                                           const Array& x, int cls) {
  Tape t;
  const ParamNodes pn = stage_parameters(t, p);
  const Tape::NodeId xb = t.leaf(as_batch_of_one(cfg, x));
  const Tape::NodeId mix = t.leaf(basis_row(cls, cfg.total_classes()));
  const GaussianNodes g = encode_node(t, pn, cfg, features_node(t, pn, cfg, xb), mix);
  return {row_of(t.value(g.mean), 0), row_of(t.value(g.logvar), 0)};
}

Array decode(const Parameters& p, const ModelConfig& cfg, std::span<const double> z) {
  if (static_cast<int>(z.size()) != cfg.latent_dim)
    throw ShapeError("latent vector of length " + std::to_string(z.size()) + ", expected " +
                     std::to_string(cfg.latent_dim));
  Tape t;
  const ParamNodes pn = stage_parameters(t, p);
  const Tape::NodeId zn = t.leaf(Array({1, cfg.latent_dim}, std::vector<double>(z.begin(), z.end())));
  const Array& out = t.value(decode_node(t, pn, cfg, zn));
  return Array({cfg.channels, cfg.length}, std::vector<double>(out.data(), out.data() + out.size()));
}

std::pair<std::vector<double>, std::vector<double>> prior(const Parameters& p, int cls) {
  const int C = p.prior_mean.dim(0);
  if (cls < 0 || cls >= C)
    throw ConfigError("class index " + std::to_string(cls) + " out of range 0.." + std::to_string(C - 1));
  return {row_of(p.prior_mean, cls), row_of(p.prior_logvar, cls)};
}

std::vector<double> reparameterize(std::span<const double> mean, std::span<const double> logvar,
                                   std::span<const double> noise) {
  if (mean.size() != logvar.size() || mean.size() != noise.size())
    throw ShapeError("reparameterize: mean/logvar/noise lengths differ");
  std::vector<double> z(mean.size());
  for (size_t i = 0; i < z.size(); ++i) z[i] = mean[i] + std::exp(0.5 * logvar[i]) * noise[i];
  return z;
}

Array classify_batch(const Parameters& p, const ModelConfig& cfg, const Array& x) {
  Tape t;
  const ParamNodes pn = stage_parameters(t, p);
  const Tape::NodeId probs = t.softmax(class_logits_node(t, pn, cfg, features_node(t, pn, cfg, t.leaf(x))), 1);
  return t.value(probs);
}

Array encode_mean_batch(const Parameters& p, const ModelConfig& cfg, const Array& x, std::span<const int> classes) {
  Tape t;
  const ParamNodes pn = stage_parameters(t, p);
  const Tape::NodeId mix = t.leaf(onehot_rows(classes, cfg.total_classes()));
  const GaussianNodes g = encode_node(t, pn, cfg, features_node(t, pn, cfg, t.leaf(x)), mix);
  return t.value(g.mean);
}

}  // namespace susl
