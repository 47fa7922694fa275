#include "tcoh/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tcoh/error.hpp"

namespace tcoh {

namespace {

void validate_shape(const Tensor::Shape& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw DimensionError("Tensor: rank must be between 1 and 4, got " + std::to_string(shape.size()));
  }
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("Tensor: extents must be positive, got " + shape_string(shape));
  }
}

}  // namespace

std::size_t shape_size(const Tensor::Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return shape.empty() ? 0 : n;
}

std::string shape_string(const Tensor::Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("Tensor: " + std::to_string(data_.size()) + " values for shape " +
                         shape_string(shape_));
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size()) {
    throw DimensionError("Tensor::reshaped: cannot view " + shape_string(shape_) + " as " +
                         shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::norm() const {
  double acc = 0.0;
  for (double v : data_) acc += v * v;
  return std::sqrt(acc);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape " + shape_string(a.shape()) + " does not match " +
                         shape_string(b.shape()));
  }
}

}  // namespace tcoh
