#pragma once

#include <optional>
#include <span>

#include "susl/model.hpp"

namespace susl {

/// Scalar knobs of the training objective. `entropy_anneal` is the scheduled
/// multiplier in [0, 1] applied to the entropy regularizer each epoch;
/// `weight_decay` is reported with the loss but applied as decoupled decay
/// inside the optimizer step.
struct LossWeights {
  double class_weight = 1.0;    // multiplies the labeled cross-entropy term
  double entropy_weight = 1.0;  // multiplies the assignment-entropy regularizer
  double entropy_anneal = 1.0;  // scheduled in [0, 1]
  double weight_decay = 0.0;
  double grad_clip = 1.0;

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double labeled_elbo = 0.0;
  double classification = 0.0;
  double unlabeled_elbo = 0.0;
  double entropy = 0.0;
  double weight_decay = 0.0;
};

/// KL(N(mean_q, e^logvar_q) || N(mean_p, e^logvar_p)) for diagonal Gaussians.
double gaussian_kl(std::span<const double> mean_q, std::span<const double> logvar_q,
                   std::span<const double> mean_p, std::span<const double> logvar_p);

/// Unit-variance Gaussian log-likelihood of x under a reconstruction:
/// -0.5*||x - x_hat||^2 - (n/2)*log(2*pi).
double recon_loglik(const Array& x, const Array& x_hat);

/// Per-sample losses (negative evidence bounds). x is (channels, length);
/// noise is one standard-normal draw of latent width.
double labeled_loss(const Parameters& p, const ModelConfig& cfg, const Array& x, int label,
                    std::span<const double> noise);
double unlabeled_loss(const Parameters& p, const ModelConfig& cfg, const Array& x, std::span<const double> noise);

/// One batch side: inputs (n, channels, length), per-sample latent noise
/// (n, latent_dim), and labels for the labeled side.
struct LabeledBatch {
  Array x;
  std::vector<int> labels;
  Array noise;
};
struct UnlabeledBatch {
  Array x;
  Array noise;
};

/// Full objective of one batch pair. Either side may be empty (zero-size
/// batch): it then contributes nothing. The decay term is reported in the
/// breakdown but excluded from gradients (the optimizer applies it).
LossBreakdown total_loss(const Parameters& p, const ModelConfig& cfg, const LabeledBatch& labeled,
                         const UnlabeledBatch& unlabeled, const LossWeights& weights);

double weight_decay_value(const Parameters& p, double weight_decay);

/// Tape-level construction used by the trainer and the gradient tests.
/// Divisors replace the per-side mean denominator so a batch may be
/// accumulated in chunks; pass 0 to use the chunk size itself.
struct ObjectiveNodes {
  Tape::NodeId objective = -1;  // scalar, decay term excluded
  Tape::NodeId labeled_elbo = -1;
  Tape::NodeId classification = -1;
  Tape::NodeId unlabeled_elbo = -1;
  Tape::NodeId entropy = -1;
};

ObjectiveNodes build_objective(Tape& t, const ParamNodes& pn, const ModelConfig& cfg, const LabeledBatch* labeled,
                               const UnlabeledBatch* unlabeled, const LossWeights& weights,
                               double labeled_divisor = 0.0, double unlabeled_divisor = 0.0);

}  // namespace susl
