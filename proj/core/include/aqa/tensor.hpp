#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace aqa {

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

// Dense n-dimensional array of 64-bit floats in row-major order.
// Tensors are plain values: copy freely, never mutate a shared one.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor zeros(const std::vector<int>& shape) { return Tensor(shape); }
  static Tensor full(const std::vector<int>& shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  double& at(std::initializer_list<int> index);
  double at(std::initializer_list<int> index) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  std::string shape_str() const { return shape_to_string(shape_); }

  bool requires_grad = false;

 private:
  std::int64_t flat_index(std::initializer_list<int> index) const;

  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace aqa
