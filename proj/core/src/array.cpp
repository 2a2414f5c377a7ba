#include "susl/array.hpp"

#include <cmath>
#include <sstream>

namespace susl {

std::string shape_str(std::span<const int> shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

int64_t shape_size(std::span<const int> shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

Array::Array(std::vector<int> shape)
    : shape_(std::move(shape)), values_(static_cast<size_t>(shape_size(shape_)), 0.0) {}

Array::Array(std::vector<int> shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != static_cast<int64_t>(values_.size()))
    throw ShapeError("shape " + shape_str(shape_) + " does not match " + std::to_string(values_.size()) + " values");
}

Array Array::scalar(double v) { return Array({1}, {v}); }

Array Array::full(std::vector<int> shape, double v) {
  Array a(std::move(shape));
  for (int64_t i = 0; i < a.size(); ++i) a[i] = v;
  return a;
}

bool Array::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Array::item() const {
  if (size() != 1) throw ShapeError("item() on array of shape " + shape_str(shape_));
  return values_[0];
}

void accumulate(Array& a, const Array& b) {
  if (!a.same_shape(b))
    throw ShapeError("accumulate: shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double* pa = a.data();
  const double* pb = b.data();
  for (int64_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

}  // namespace susl
