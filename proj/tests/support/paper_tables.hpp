#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace susl::testing {

// Published confusion matrices (rows = true class, columns = predicted class
// after cluster mapping) together with their stated accuracies. They serve
// as pure metric oracles: score() must reproduce every accuracy.
struct ReferenceMatrix {
  std::string name;
  std::vector<std::vector<int64_t>> counts;
  double accuracy;
};

const std::vector<ReferenceMatrix>& reference_matrices();

// Published per-class train/test counts for the three benchmark datasets.
struct ClassCounts {
  std::vector<int64_t> train, test;

  int64_t train_total() const;
  int64_t test_total() const;
};

ClassCounts har_counts();  // walking, walking_upstairs, walking_downstairs, sitting, standing, laying
ClassCounts ecg_counts();  // N, S, V, F, Q
ClassCounts electric_devices_counts();  // classes 1..7

// Majority-vote test accuracies implied by the count tables.
inline constexpr double kHarMajority = 18.22;
inline constexpr double kEcgMajority = 82.76;
inline constexpr double kElectricDevicesMajority = 24.23;

}  // namespace susl::testing
