#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "brainage/error.hpp"

namespace brainage {

using RealVector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix from_rows(const std::vector<RealVector>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  Matrix& operator+=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Minkowski distance (sum_i |x_i - y_i|^k)^(1/k). k = 1 is Manhattan.
double lk_distance(std::span<const double> x, std::span<const double> y, double k);

/// Divides every row by the largest row L2 norm in the batch. A batch whose
/// largest norm is <= 1e-12 is returned unchanged.
std::vector<RealVector> batch_max_l2_normalize(const std::vector<RealVector>& batch);
Matrix batch_max_l2_normalize(const Matrix& batch);

/// Largest row L2 norm of `batch`.
double max_row_l2_norm(const Matrix& batch);

RealVector stable_softmax(std::span<const double> logits);
/// Row-wise softmax of a logits matrix.
Matrix softmax_rows(const Matrix& logits);

double l2_norm(std::span<const double> x);
bool all_finite(std::span<const double> x);

}  // namespace brainage
