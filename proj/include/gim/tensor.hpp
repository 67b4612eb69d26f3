// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gim {

/// Dense row-major tensor of 64-bit reals. Immutable shape; data mutable
/// only through explicit accessors. All numeric state in the project lives
/// in these.
class Tensor {
 public:
  Tensor() = default;

  // Zero-filled.
  explicit Tensor(std::vector<int64_t> shape);

  // Takes ownership of data; throws std::invalid_argument on size mismatch.
  Tensor(std::vector<int64_t> shape, std::vector<double> data);

  static Tensor scalar(double v);

  // Construction from untrusted input (files, CLI): additionally rejects
  // NaN/Inf entries.
  static Tensor from_external(std::vector<int64_t> shape,
                              std::vector<double> data);

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Rank-2 accessors.
  double& at(int64_t i, int64_t j) {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }
  double at(int64_t i, int64_t j) const {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }
  int64_t rows() const { return shape_[0]; }
  int64_t cols() const { return shape_[1]; }

  std::span<double> row(int64_t i) {
    return {data_.data() + i * shape_[1], static_cast<size_t>(shape_[1])};
  }
  std::span<const double> row(int64_t i) const {
    return {data_.data() + i * shape_[1], static_cast<size_t>(shape_[1])};
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool is_scalar() const { return data_.size() == 1; }

  bool all_finite() const;

  std::string shape_string() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

int64_t shape_product(const std::vector<int64_t>& shape);

}  // namespace gim
