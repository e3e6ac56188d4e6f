#include "panoptix/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace panoptix::nn {

int64_t shape_size(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 4) {
    throw std::invalid_argument("tensor rank must be 1..4");
  }
  data_.assign(static_cast<size_t>(shape_size(shape_)), Scalar{0});
}

Tensor::Tensor(std::vector<int> shape, std::vector<Scalar> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty() || shape_.size() > 4) {
    throw std::invalid_argument("tensor rank must be 1..4");
  }
  if (shape_size(shape_) != static_cast<int64_t>(data_.size())) {
    throw std::invalid_argument("tensor data size does not match shape");
  }
}

Tensor Tensor::full(std::vector<int> shape, Scalar v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

bool Tensor::all_finite() const {
  for (Scalar v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(Scalar v) { data_.assign(data_.size(), v); }

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ", ";
    os << shape_[i];
  }
  os << ")";
  return os.str();
}

}  // namespace panoptix::nn
