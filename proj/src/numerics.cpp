#include "brainage/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace brainage {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows_ * cols_) {
    throw ContractViolation("Matrix: " + std::to_string(data_.size()) + " values for " +
                            std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix Matrix::from_rows(const std::vector<RealVector>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw ContractViolation("Matrix::from_rows: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (!same_shape(other)) throw ContractViolation("Matrix +=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

double lk_distance(std::span<const double> x, std::span<const double> y, double k) {
  if (x.size() != y.size() || x.empty()) {
    throw ContractViolation("lk_distance: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                            std::to_string(y.size()) + ")");
  }
  if (!(k > 0.0) || !std::isfinite(k)) throw InvalidParameter("lk_distance: k must be positive");

  double acc = 0.0;
  if (k == 1.0) {
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
    return acc;
  }
  if (k == 2.0) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - y[i];
      acc += d * d;
    }
    return std::sqrt(acc);
  }
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::pow(std::abs(x[i] - y[i]), k);
  return acc == 0.0 ? 0.0 : std::pow(acc, 1.0 / k);
}

double l2_norm(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc);
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

double max_row_l2_norm(const Matrix& batch) {
  double best = 0.0;
  for (std::size_t r = 0; r < batch.rows(); ++r) best = std::max(best, l2_norm(batch.row(r)));
  return best;
}

Matrix batch_max_l2_normalize(const Matrix& batch) {
  const double denom = max_row_l2_norm(batch);
  Matrix out = batch;
  if (denom <= 1e-12) return out;
  for (double& v : out.values()) v /= denom;
  return out;
}

std::vector<RealVector> batch_max_l2_normalize(const std::vector<RealVector>& batch) {
  if (batch.empty()) throw ContractViolation("batch_max_l2_normalize: empty batch");
  const Matrix normalized = batch_max_l2_normalize(Matrix::from_rows(batch));
  std::vector<RealVector> out(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto row = normalized.row(r);
    out[r].assign(row.begin(), row.end());
  }
  return out;
}

RealVector stable_softmax(std::span<const double> logits) {
  if (logits.empty()) throw ContractViolation("stable_softmax: empty logits");
  double top = logits[0];
  for (double z : logits) {
    if (std::isnan(z)) throw ContractViolation("stable_softmax: NaN logit");
    top = std::max(top, z);
  }
  RealVector p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const RealVector p = stable_softmax(logits.row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace brainage
