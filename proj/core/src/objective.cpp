#include "susl/objective.hpp"

#include <cmath>
#include <numbers>

#include "susl/errors.hpp"

namespace susl {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
}

void LossWeights::validate() const {
  for (double v : {class_weight, entropy_weight, entropy_anneal, weight_decay, grad_clip})
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and non-negative");
  if (entropy_anneal > 1.0) throw ConfigError("entropy_anneal must lie in [0, 1]");
  if (grad_clip <= 0.0) throw ConfigError("grad_clip must be positive");
}

double gaussian_kl(std::span<const double> mean_q, std::span<const double> logvar_q,
                   std::span<const double> mean_p, std::span<const double> logvar_p) {
  const size_t n = mean_q.size();
  if (logvar_q.size() != n || mean_p.size() != n || logvar_p.size() != n)
    throw ShapeError("gaussian_kl: argument lengths differ");
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dm = mean_q[i] - mean_p[i];
    acc += logvar_p[i] - logvar_q[i] + (std::exp(logvar_q[i]) + dm * dm) / std::exp(logvar_p[i]) - 1.0;
  }
  return 0.5 * acc;
}

double recon_loglik(const Array& x, const Array& x_hat) {
  if (!x.same_shape(x_hat))
    throw ShapeError("recon_loglik: shape " + shape_str(x.shape()) + " vs " + shape_str(x_hat.shape()));
  double rss = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) {
    const double r = x[i] - x_hat[i];
    rss += r * r;
  }
  return -0.5 * rss - 0.5 * static_cast<double>(x.size()) * kLog2Pi;
}

namespace {

struct SideContext {
  Tape::NodeId feat;    // (n, F)
  Tape::NodeId x_flat;  // (n, channels*length)
  Tape::NodeId noise;   // (n, d)
  int n;
};

SideContext stage_side(Tape& t, const ParamNodes& pn, const ModelConfig& cfg, const Array& x, const Array& noise) {
  if (x.rank() != 3 || x.dim(1) != cfg.channels || x.dim(2) != cfg.length)
    throw ShapeError("batch " + shape_str(x.shape()) + " does not match model input (n, " +
                     std::to_string(cfg.channels) + ", " + std::to_string(cfg.length) + ")");
  const int n = x.dim(0);
  if (noise.rank() != 2 || noise.dim(0) != n || noise.dim(1) != cfg.latent_dim)
    throw ShapeError("latent noise " + shape_str(noise.shape()) + " must be (" + std::to_string(n) + ", " +
                     std::to_string(cfg.latent_dim) + ")");
  SideContext ctx;
  const Tape::NodeId xn = t.leaf(x);
  ctx.feat = features_node(t, pn, cfg, xn);
  ctx.x_flat = t.reshape(xn, {n, cfg.channels * cfg.length});
  ctx.noise = t.leaf(noise);
  ctx.n = n;
  return ctx;
}

// Per-sample negative bound given posterior and prior Gaussians, both (n, d).
// recon + KL(q(z|x,y) || p(z|y)) + log C, with z reparameterized from the
// staged noise. Returns a column (n).
Tape::NodeId bound_column(Tape& t, const ParamNodes& pn, const ModelConfig& cfg, const SideContext& ctx,
                          GaussianNodes posterior, GaussianNodes prior_rows) {
  const Tape::NodeId z = reparameterize_node(t, posterior, ctx.noise);
  const Tape::NodeId x_hat = t.reshape(decode_node(t, pn, cfg, z), {ctx.n, cfg.channels * cfg.length});
  const Tape::NodeId resid = t.sub(ctx.x_flat, x_hat);
  const int dim = cfg.channels * cfg.length;
  const Tape::NodeId neg_loglik =
      t.add_const(t.scale(t.sum_axis(t.mul(resid, resid), 1), 0.5), 0.5 * dim * kLog2Pi);

  const Tape::NodeId dlv = t.sub(posterior.logvar, prior_rows.logvar);
  const Tape::NodeId diff = t.sub(posterior.mean, prior_rows.mean);
  const Tape::NodeId ratio = t.mul(t.mul(diff, diff), t.exp(t.scale(prior_rows.logvar, -1.0)));
  const Tape::NodeId inner = t.add(t.add(t.scale(dlv, -1.0), t.exp(dlv)), t.add_const(ratio, -1.0));
  const Tape::NodeId kl = t.scale(t.sum_axis(inner, 1), 0.5);

  return t.add_const(t.add(neg_loglik, kl), std::log(static_cast<double>(cfg.total_classes())));
}

// (1, d) row replicated into n rows, keeping gradients flowing to the row.
Tape::NodeId tile_rows(Tape& t, Tape::NodeId ones_col, Tape::NodeId row) { return t.matmul(ones_col, row); }

void check_labels(const ModelConfig& cfg, std::span<const int> labels) {
  for (int y : labels)
    if (y < 0 || y >= cfg.n_known_classes)
      throw ConfigError("label " + std::to_string(y) + " outside the known classes 0.." +
                        std::to_string(cfg.n_known_classes - 1));
}

}  // namespace

ObjectiveNodes build_objective(Tape& t, const ParamNodes& pn, const ModelConfig& cfg, const LabeledBatch* labeled,
                               const UnlabeledBatch* unlabeled, const LossWeights& weights, double labeled_divisor,
                               double unlabeled_divisor) {
  weights.validate();
  const int C = cfg.total_classes();
  ObjectiveNodes out;
  std::vector<Tape::NodeId> terms;

  if (labeled && labeled->x.size() > 0) {
    check_labels(cfg, labeled->labels);
    const SideContext ctx = stage_side(t, pn, cfg, labeled->x, labeled->noise);
    const double div = labeled_divisor > 0 ? labeled_divisor : static_cast<double>(ctx.n);
    const Tape::NodeId mix = t.leaf(onehot_rows(labeled->labels, C));
    const GaussianNodes posterior = encode_node(t, pn, cfg, ctx.feat, mix);
    const GaussianNodes prior_rows = prior_node(t, pn, mix);
    const Tape::NodeId bound = bound_column(t, pn, cfg, ctx, posterior, prior_rows);
    out.labeled_elbo = t.scale(t.sum(bound), 1.0 / div);
    terms.push_back(out.labeled_elbo);

    const Tape::NodeId logits = class_logits_node(t, pn, cfg, ctx.feat);
    const Tape::NodeId picked = t.sum_axis(t.mul(t.log_softmax(logits, 1), mix), 1);
    out.classification = t.scale(t.sum(picked), -weights.class_weight / div);
    terms.push_back(out.classification);
  }

  if (unlabeled && unlabeled->x.size() > 0) {
    const SideContext ctx = stage_side(t, pn, cfg, unlabeled->x, unlabeled->noise);
    const double div = unlabeled_divisor > 0 ? unlabeled_divisor : static_cast<double>(ctx.n);
    const Tape::NodeId logits = class_logits_node(t, pn, cfg, ctx.feat);
    const Tape::NodeId q = t.softmax(logits, 1);
    const Tape::NodeId log_q = t.log_softmax(logits, 1);
    const Tape::NodeId ones_col = t.leaf(Array::full({ctx.n, 1}, 1.0));

    // Class-independent encoder halves, hoisted out of the class loop.
    const Tape::NodeId enc_mean_base = t.add(t.matmul(ctx.feat, pn.enc_mean_w_feat), pn.enc_mean_b);
    const Tape::NodeId enc_logvar_base = t.add(t.matmul(ctx.feat, pn.enc_logvar_w_feat), pn.enc_logvar_b);

    std::vector<Tape::NodeId> columns;
    columns.reserve(static_cast<size_t>(C));
    for (int c = 0; c < C; ++c) {
      const Tape::NodeId mix = t.leaf(basis_row(c, C));
      const GaussianNodes posterior{t.add(enc_mean_base, t.matmul(mix, pn.enc_mean_w_class)),
                                    t.add(enc_logvar_base, t.matmul(mix, pn.enc_logvar_w_class))};
      const GaussianNodes prior_rows{tile_rows(t, ones_col, t.matmul(mix, pn.prior_mean)),
                                     tile_rows(t, ones_col, t.matmul(mix, pn.prior_logvar))};
      const Tape::NodeId col = bound_column(t, pn, cfg, ctx, posterior, prior_rows);
      columns.push_back(t.reshape(col, {ctx.n, 1}));
    }
    const Tape::NodeId bounds = t.concat(columns, 1);                  // (n, C)
    const Tape::NodeId neg_entropy = t.sum_axis(t.mul(q, log_q), 1);   // (n), = sum_c q log q
    const Tape::NodeId marginal = t.sum_axis(t.mul(q, bounds), 1);     // (n)
    out.unlabeled_elbo = t.scale(t.sum(t.add(marginal, neg_entropy)), 1.0 / div);
    terms.push_back(out.unlabeled_elbo);

    const double gl = weights.entropy_weight * weights.entropy_anneal;
    out.entropy = t.scale(t.sum(neg_entropy), -gl / div);
    terms.push_back(out.entropy);
  }

  if (terms.empty()) throw ConfigError("objective needs at least one non-empty batch side");
  Tape::NodeId acc = terms[0];
  for (size_t i = 1; i < terms.size(); ++i) acc = t.add(acc, terms[i]);
  out.objective = acc;
  return out;
}

double labeled_loss(const Parameters& p, const ModelConfig& cfg, const Array& x, int label,
                    std::span<const double> noise) {
  if (static_cast<int>(noise.size()) != cfg.latent_dim)
    throw ShapeError("noise length " + std::to_string(noise.size()) + ", expected latent_dim");
  Tape t;
  const ParamNodes pn = stage_parameters(t, p);
  LabeledBatch batch{Array({1, cfg.channels, cfg.length}, std::vector<double>(x.data(), x.data() + x.size())),
                     {label},
                     Array({1, cfg.latent_dim}, std::vector<double>(noise.begin(), noise.end()))};
  LossWeights w;
  w.class_weight = 0.0;
  const ObjectiveNodes nodes = build_objective(t, pn, cfg, &batch, nullptr, w);
  return t.value(nodes.labeled_elbo).item();
}

double unlabeled_loss(const Parameters& p, const ModelConfig& cfg, const Array& x, std::span<const double> noise) {
  if (static_cast<int>(noise.size()) != cfg.latent_dim)
    throw ShapeError("noise length " + std::to_string(noise.size()) + ", expected latent_dim");
  Tape t;
  const ParamNodes pn = stage_parameters(t, p);
  UnlabeledBatch batch{Array({1, cfg.channels, cfg.length}, std::vector<double>(x.data(), x.data() + x.size())),
                       Array({1, cfg.latent_dim}, std::vector<double>(noise.begin(), noise.end()))};
  LossWeights w;
  w.entropy_weight = 0.0;
  const ObjectiveNodes nodes = build_objective(t, pn, cfg, nullptr, &batch, w);
  return t.value(nodes.unlabeled_elbo).item();
}

double weight_decay_value(const Parameters& p, double weight_decay) {
  if (weight_decay == 0.0) return 0.0;
  double sq = 0.0;
  p.for_each([&sq](const std::string& name, const Array& a) {
    if (!Parameters::decays(name)) return;
    for (int64_t i = 0; i < a.size(); ++i) sq += a[i] * a[i];
  });
  return weight_decay * sq;
}

LossBreakdown total_loss(const Parameters& p, const ModelConfig& cfg, const LabeledBatch& labeled,
                         const UnlabeledBatch& unlabeled, const LossWeights& weights) {
  Tape t;
  const ParamNodes pn = stage_parameters(t, p);
  const ObjectiveNodes nodes = build_objective(t, pn, cfg, &labeled, &unlabeled, weights);
  LossBreakdown b;
  if (nodes.labeled_elbo >= 0) b.labeled_elbo = t.value(nodes.labeled_elbo).item();
  if (nodes.classification >= 0) b.classification = t.value(nodes.classification).item();
  if (nodes.unlabeled_elbo >= 0) b.unlabeled_elbo = t.value(nodes.unlabeled_elbo).item();
  if (nodes.entropy >= 0) b.entropy = t.value(nodes.entropy).item();
  b.weight_decay = weight_decay_value(p, weights.weight_decay);
  b.total = b.labeled_elbo + b.classification + b.unlabeled_elbo + b.entropy + b.weight_decay;
  return b;
}

}  // namespace susl
