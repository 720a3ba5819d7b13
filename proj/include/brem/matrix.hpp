#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace brem {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("Matrix: data size " + std::to_string(data_.size()) +
                                  " does not match " + std::to_string(rows_) + "x" +
                                  std::to_string(cols_));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Dense row-major rank-4 tensor, used for the (T, I, N, C) anchor grid.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(std::size_t d0, std::size_t d1, std::size_t d2, std::size_t d3, double fill = 0.0)
      : dims_{d0, d1, d2, d3}, data_(d0 * d1 * d2 * d3, fill) {}

  std::size_t dim(std::size_t axis) const { return dims_[axis]; }

  std::size_t offset(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return ((a * dims_[1] + b) * dims_[2] + c) * dims_[3] + d;
  }
  double& operator()(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data_[offset(a, b, c, d)];
  }
  double operator()(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data_[offset(a, b, c, d)];
  }

  /// Innermost vector at (a, b, c).
  std::span<double> vec(std::size_t a, std::size_t b, std::size_t c) {
    return {data_.data() + offset(a, b, c, 0), dims_[3]};
  }
  std::span<const double> vec(std::size_t a, std::size_t b, std::size_t c) const {
    return {data_.data() + offset(a, b, c, 0), dims_[3]};
  }

  /// All (c, d) entries at (a, b), contiguous.
  std::span<const double> slab(std::size_t a, std::size_t b) const {
    return {data_.data() + offset(a, b, 0, 0), dims_[2] * dims_[3]};
  }

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t dims_[4] = {0, 0, 0, 0};
  std::vector<double> data_;
};

/// Dense row-major rank-3 tensor (T, I, C).
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, double fill = 0.0)
      : dims_{d0, d1, d2}, data_(d0 * d1 * d2, fill) {}

  std::size_t dim(std::size_t axis) const { return dims_[axis]; }

  double& operator()(std::size_t a, std::size_t b, std::size_t c) {
    return data_[(a * dims_[1] + b) * dims_[2] + c];
  }
  double operator()(std::size_t a, std::size_t b, std::size_t c) const {
    return data_[(a * dims_[1] + b) * dims_[2] + c];
  }
  std::span<double> vec(std::size_t a, std::size_t b) {
    return {data_.data() + (a * dims_[1] + b) * dims_[2], dims_[2]};
  }
  std::span<const double> vec(std::size_t a, std::size_t b) const {
    return {data_.data() + (a * dims_[1] + b) * dims_[2], dims_[2]};
  }

 private:
  std::size_t dims_[3] = {0, 0, 0};
  std::vector<double> data_;
};

}  // namespace brem
