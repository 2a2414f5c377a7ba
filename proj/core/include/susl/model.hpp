#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "susl/array.hpp"
#include "susl/tape.hpp"

namespace susl {

enum class Variant { conv, mlp };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// Architecture description. The classifier, the class-conditional encoder
/// and the decoder are all derived from these knobs; the total number of
/// output classes is known classes plus augmented (label-free) slots.
struct ModelConfig {
  int channels = 1;
  int length = 0;
  int n_known_classes = 0;
  int n_augmented_classes = 0;
  int latent_dim = 10;
  int layers = 1;
  int filters = 32;
  int units = 128;
  int kernel_size = 3;
  Variant variant = Variant::conv;

  int total_classes() const { return n_known_classes + n_augmented_classes; }
  int padding() const { return (kernel_size - 1) / 2; }

  /// Spatial lengths along the conv trunk: index 0 is the input length,
  /// index `layers` the length entering the flatten.
  std::vector<int> encoder_lengths() const;

  /// Width of the shared feature vector feeding the heads.
  int feature_dim() const;

  void validate() const;
};

/// All trainable state: shared trunk, classifier head, class-conditional
/// encoder heads, decoder, and the per-class Gaussian prior table.
///
/// The encoder head is linear in (features ++ one-hot class); it is stored
/// as two blocks (feature weights, class weights) so a single class row can
/// be selected without materializing one-hot batches.
struct Parameters {
  std::vector<Array> trunk_w, trunk_b;
  Array cls_w, cls_b;
  Array enc_mean_w_feat, enc_mean_w_class, enc_mean_b;
  Array enc_logvar_w_feat, enc_logvar_w_class, enc_logvar_b;
  Array dec_in_w, dec_in_b;
  std::vector<Array> dec_w, dec_b;
  Array out_w, out_b;
  Array prior_mean, prior_logvar;  // (C, latent_dim)

  void for_each(const std::function<void(const std::string&, Array&)>& fn);
  void for_each(const std::function<void(const std::string&, const Array&)>& fn) const;
  int64_t count() const;

  /// Prior rows locate the latent clusters; they are exempt from weight decay.
  static bool decays(const std::string& name);
};

Parameters init_parameters(const ModelConfig& cfg, uint64_t seed);
int64_t parameter_count(const ModelConfig& cfg);

/// Tape handles for one staged parameter set.
struct ParamNodes {
  std::vector<Tape::NodeId> trunk_w, trunk_b;
  Tape::NodeId cls_w, cls_b;
  Tape::NodeId enc_mean_w_feat, enc_mean_w_class, enc_mean_b;
  Tape::NodeId enc_logvar_w_feat, enc_logvar_w_class, enc_logvar_b;
  Tape::NodeId dec_in_w, dec_in_b;
  std::vector<Tape::NodeId> dec_w, dec_b;
  Tape::NodeId out_w, out_b;
  Tape::NodeId prior_mean, prior_logvar;

  std::vector<Tape::NodeId> all() const;
};

ParamNodes stage_parameters(Tape& tape, const Parameters& p);

// Batched forward builders. x is (batch, channels, length).
Tape::NodeId features_node(Tape& t, const ParamNodes& p, const ModelConfig& cfg, Tape::NodeId x);
Tape::NodeId class_logits_node(Tape& t, const ParamNodes& p, const ModelConfig& cfg, Tape::NodeId feat);

struct GaussianNodes {
  Tape::NodeId mean, logvar;
};
/// class_mix is either one-hot rows (batch, C) or a single basis row (1, C)
/// broadcast over the batch.
GaussianNodes encode_node(Tape& t, const ParamNodes& p, const ModelConfig& cfg, Tape::NodeId feat,
                          Tape::NodeId class_mix);
GaussianNodes prior_node(Tape& t, const ParamNodes& p, Tape::NodeId class_mix);
Tape::NodeId reparameterize_node(Tape& t, GaussianNodes g, Tape::NodeId noise);
Tape::NodeId decode_node(Tape& t, const ParamNodes& p, const ModelConfig& cfg, Tape::NodeId z);

// One-hot helpers.
Array onehot_rows(std::span<const int> labels, int n_classes);
Array basis_row(int cls, int n_classes);

// Single-sample surfaces (x is (channels, length)).
std::vector<double> classify(const Parameters& p, const ModelConfig& cfg, const Array& x);
std::pair<std::vector<double>, std::vector<double>> encode(const Parameters& p, const ModelConfig& cfg,
                                                           const Array& x, int cls);
Array decode(const Parameters& p, const ModelConfig& cfg, std::span<const double> z);
std::pair<std::vector<double>, std::vector<double>> prior(const Parameters& p, int cls);
std::vector<double> reparameterize(std::span<const double> mean, std::span<const double> logvar,
                                   std::span<const double> noise);

/// Class probabilities for a batch: x (batch, channels, length) -> (batch, C).
Array classify_batch(const Parameters& p, const ModelConfig& cfg, const Array& x);

/// Posterior means q(z|x,y) for per-sample classes: -> (batch, latent_dim).
Array encode_mean_batch(const Parameters& p, const ModelConfig& cfg, const Array& x, std::span<const int> classes);

}  // namespace susl
