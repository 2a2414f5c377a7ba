#include "support/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "susl/rng.hpp"

namespace susl::testing {

namespace {

double wave(int cls, double theta) {
  switch (cls) {
    case 0: return std::sin(theta);
    case 1: return std::sin(theta) >= 0.0 ? 1.0 : -1.0;
    case 2: {
      const double turns = theta / (2.0 * std::numbers::pi);
      return 2.0 * (turns - std::floor(turns)) - 1.0;
    }
    default: return 0.0;
  }
}

SeriesSample make_sample(int cls, int length, int64_t id, Rng& rng) {
  SeriesSample s;
  s.label = cls;
  s.id = id;
  s.values.resize(static_cast<size_t>(length));
  if (cls == 3) {
    for (auto& v : s.values) v = rng.normal();
    return s;
  }
  const double cycles = rng.uniform(2.0, 6.0);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < length; ++i) {
    const double theta = 2.0 * std::numbers::pi * cycles * i / length + phase;
    s.values[static_cast<size_t>(i)] = wave(cls, theta) + 0.1 * rng.normal();
  }
  return s;
}

}  // namespace

DatasetBundle make_waveform_bundle(const SyntheticSpec& spec) {
  DatasetBundle b;
  b.name = "synthetic_waves";
  b.channels = 1;
  b.length = spec.length;
  b.class_names = {"sine", "square", "sawtooth", "noise"};

  Rng train_rng = Rng(spec.seed).derive("train");
  Rng test_rng = Rng(spec.seed).derive("test");
  int64_t id = 0;
  for (int cls = 0; cls < 4; ++cls)
    for (int i = 0; i < spec.train_per_class; ++i) b.train.push_back(make_sample(cls, spec.length, id++, train_rng));
  for (int cls = 0; cls < 4; ++cls)
    for (int i = 0; i < spec.test_per_class; ++i) b.test.push_back(make_sample(cls, spec.length, id++, test_rng));
  b.validate();
  return b;
}

}  // namespace susl::testing
