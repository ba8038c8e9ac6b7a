#include "wagf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "wagf/errors.hpp"

WAGF_BEGIN_NAMESPACE

std::size_t shape_numel(const Shape& shape) {
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

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_str(shape_));
  }
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_str(shape_));
  }
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str(shape_));
  }
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> idx) const {
  if (idx.size() != shape_.size()) throw ShapeError("index rank mismatch");
  std::size_t off = 0;
  std::size_t d = 0;
  for (auto i : idx) {
    if (i >= shape_[d]) throw ShapeError("index out of range");
    off = off * shape_[d] + i;
    ++d;
  }
  return off;
}

Real& Tensor::at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
Real Tensor::at(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

Real Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), Real(0)); }

Real Tensor::max_abs() const {
  Real m = 0;
  for (auto v : data_) m = std::max(m, std::abs(v));
  return m;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

WAGF_END_NAMESPACE
