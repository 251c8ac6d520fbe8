#include "adsm/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "adsm/errors.hpp"

namespace adsm {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  ADSM_REQUIRE(data_.size() == shape_size(shape_),
               "tensor buffer length " + std::to_string(data_.size()) +
                   " does not match shape " + shape_str(shape_));
}

Tensor Tensor::from(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  ADSM_REQUIRE(axis < shape_.size(), "axis out of range for shape " + shape_str(shape_));
  return shape_[axis];
}

double Tensor::item() const {
  ADSM_REQUIRE(data_.size() == 1, "item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  ADSM_REQUIRE(shape_size(shape) == data_.size(),
               "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  ADSM_REQUIRE(a.shape() == b.shape(), "max_abs_diff shape mismatch " +
                                           shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace adsm
