#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "susl/errors.hpp"

namespace susl {

/// Dense row-major array of doubles. Arrays are immutable values once built;
/// the mutating accessors exist for construction sites only.
class Array {
 public:
  Array() = default;
  explicit Array(std::vector<int> shape);  // zero-filled
  Array(std::vector<int> shape, std::vector<double> values);

  static Array scalar(double v);
  static Array full(std::vector<int> shape, double v);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t size() const { return static_cast<int64_t>(values_.size()); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<const double> values() const { return values_; }
  double operator[](int64_t i) const { return values_[static_cast<size_t>(i)]; }
  double& operator[](int64_t i) { return values_[static_cast<size_t>(i)]; }

  bool same_shape(const Array& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  /// The value of a single-element array.
  double item() const;

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
};

int64_t shape_size(std::span<const int> shape);

/// a += b, shapes must match.
void accumulate(Array& a, const Array& b);

}  // namespace susl
