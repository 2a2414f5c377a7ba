#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "susl/tape.hpp"

namespace susl::testing {

// Independent derivative oracle: central finite differences against the
// tape's reverse-mode gradients. The graph output is folded to a scalar
// through a fixed elementwise weighting so every output element contributes.

using GraphBuilder = std::function<susl::Tape::NodeId(susl::Tape&, const std::vector<susl::Tape::NodeId>&)>;

inline susl::Array weights_like(const susl::Array& a) {
  susl::Array w(a.shape());
  for (int64_t i = 0; i < w.size(); ++i) w[i] = std::sin(0.7 * static_cast<double>(i)) + 1.1;
  return w;
}

inline double eval_scalar(const GraphBuilder& build, const std::vector<susl::Array>& inputs) {
  susl::Tape t;
  std::vector<susl::Tape::NodeId> ids;
  ids.reserve(inputs.size());
  for (const auto& a : inputs) ids.push_back(t.leaf(a));
  const auto out = build(t, ids);
  const auto folded = t.sum(t.mul(out, t.leaf(weights_like(t.value(out)))));
  return t.value(folded).item();
}

/// Largest relative error between reverse-mode and finite-difference
/// gradients over every element of every input, with |fd| floored at 1.
inline double max_gradient_error(const GraphBuilder& build, std::vector<susl::Array> inputs, double eps = 1e-5) {
  susl::Tape t;
  std::vector<susl::Tape::NodeId> ids;
  for (const auto& a : inputs) ids.push_back(t.leaf(a));
  const auto out = build(t, ids);
  const auto folded = t.sum(t.mul(out, t.leaf(weights_like(t.value(out)))));
  const std::vector<susl::Array> grads = t.gradients(folded, ids);

  double worst = 0.0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    for (int64_t j = 0; j < inputs[k].size(); ++j) {
      const double saved = inputs[k][j];
      inputs[k][j] = saved + eps;
      const double hi = eval_scalar(build, inputs);
      inputs[k][j] = saved - eps;
      const double lo = eval_scalar(build, inputs);
      inputs[k][j] = saved;
      const double fd = (hi - lo) / (2.0 * eps);
      const double err = std::abs(fd - grads[k][j]) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace susl::testing
