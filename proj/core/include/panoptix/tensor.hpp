#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace panoptix::nn {

using Scalar = double;

/// Dense row-major tensor of rank <= 4. Feature maps are stored (H, W, C),
/// vectors (N), scalars as rank-1 of size 1. Values are double in memory;
/// checkpoints serialize as f32.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<Scalar> data);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, Scalar v);
  static Tensor scalar(Scalar v) { return Tensor({1}, {v}); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Scalar& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  Scalar operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  /// (H, W, C) accessor.
  Scalar& at(int h, int w, int c) {
    return data_[static_cast<size_t>((static_cast<int64_t>(h) * shape_[1] + w) * shape_[2] + c)];
  }
  Scalar at(int h, int w, int c) const {
    return data_[static_cast<size_t>((static_cast<int64_t>(h) * shape_[1] + w) * shape_[2] + c)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  void fill(Scalar v);

  std::string shape_str() const;  // e.g. "(8, 8, 32)"

 private:
  std::vector<int> shape_;
  std::vector<Scalar> data_;
};

int64_t shape_size(const std::vector<int>& shape);

}  // namespace panoptix::nn
