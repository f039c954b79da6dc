#include "aqa/tensor.hpp"

#include <cmath>
#include <sstream>

#include "aqa/errors.hpp"

namespace aqa {

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  for (int d : shape_) {
    if (d <= 0) throw ShapeError("tensor: nonpositive dimension in shape " + shape_str());
  }
  data_.assign(static_cast<std::size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  for (int d : shape_) {
    if (d <= 0) throw ShapeError("tensor: nonpositive dimension in shape " + shape_str());
  }
  if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw ShapeError("tensor: shape " + shape_str() + " expects " +
                     std::to_string(shape_numel(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
}

Tensor Tensor::full(const std::vector<int>& shape, double value) {
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = value;
  return t;
}

std::int64_t Tensor::flat_index(std::initializer_list<int> index) const {
  if (static_cast<int>(index.size()) != rank()) {
    throw ShapeError("tensor: index rank " + std::to_string(index.size()) +
                     " does not match shape " + shape_str());
  }
  std::int64_t flat = 0;
  int axis = 0;
  for (int i : index) {
    if (i < 0 || i >= shape_[static_cast<std::size_t>(axis)]) {
      throw ShapeError("tensor: index out of range for shape " + shape_str());
    }
    flat = flat * shape_[static_cast<std::size_t>(axis)] + i;
    ++axis;
  }
  return flat;
}

double& Tensor::at(std::initializer_list<int> index) { return data_[static_cast<std::size_t>(flat_index(index))]; }

double Tensor::at(std::initializer_list<int> index) const {
  return data_[static_cast<std::size_t>(flat_index(index))];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace aqa
