#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "wagf/real.hpp"

WAGF_BEGIN_NAMESPACE

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major n-dimensional array. Feature maps are channels-last
/// ([H, W, C]); matrices are [rows, cols].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, Real v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(Real v) { return Tensor({1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  Real& at(std::initializer_list<std::size_t> idx);
  Real at(std::initializer_list<std::size_t> idx) const;

  /// Same buffer under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  void fill(Real v);
  bool all_finite() const;
  Real sum() const;
  Real max_abs() const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;

  Shape shape_;
  std::vector<Real> data_;
};

/// Throws ShapeError naming `what` unless the shapes are identical.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

WAGF_END_NAMESPACE
