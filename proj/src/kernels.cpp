#include "brainage/kernels.hpp"

#include <cmath>
#include <cstdint>

namespace brainage::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

void check_inner(std::size_t lhs, std::size_t rhs, const char* what) {
  if (lhs != rhs) throw ContractViolation(std::string(what) + ": inner dimension mismatch");
}

inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i) {
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();
  double* dst = out.row(i).data();
  for (std::size_t p = 0; p < inner; ++p) {
    const double s = a(i, p);
    if (s == 0.0) continue;
    const double* src = b.row(p).data();
    for (std::size_t j = 0; j < m; ++j) dst[j] += s * src[j];
  }
}

// Row p of a^T b: sum over samples r of a(r, p) * b.row(r), r ascending.
inline void matmul_at_b_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t p) {
  const std::size_t m = b.cols();
  double* dst = out.row(p).data();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double s = a(r, p);
    if (s == 0.0) continue;
    const double* src = b.row(r).data();
    for (std::size_t j = 0; j < m; ++j) dst[j] += s * src[j];
  }
}

inline void matmul_a_bt_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i) {
  const auto lhs = a.row(i);
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const auto rhs = b.row(j);
    double acc = 0.0;
    for (std::size_t p = 0; p < lhs.size(); ++p) acc += lhs[p] * rhs[p];
    out(i, j) = acc;
  }
}

// Per-row partial of the ORDER pairwise sums; returns sum_j w_ij L_ij.
inline double order_row(const Matrix& xbar, std::span<const double> ages, double k, std::size_t i,
                        std::span<double> grad_row, std::vector<double>& scratch) {
  const std::size_t n = xbar.rows();
  double row_sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    const double w = std::abs(ages[i] - ages[j]);
    if (w == 0.0) continue;
    const double dist = lk_distance(xbar.row(i), xbar.row(j), k);
    row_sum += w * dist;
    lk_distance_grad(xbar.row(i), xbar.row(j), k, dist, i < j, scratch);
    for (std::size_t c = 0; c < grad_row.size(); ++c) grad_row[c] += 2.0 * w * scratch[c];
  }
  return row_sum;
}

void check_order_inputs(const Matrix& xbar, std::span<const double> ages) {
  if (ages.size() != xbar.rows()) throw ContractViolation("order_pairwise: ages/features row mismatch");
}

}  // namespace

void lk_distance_grad(std::span<const double> x, std::span<const double> y, double k,
                      double distance, bool x_first, std::span<double> out) {
  const double tie_sign = x_first ? 1.0 : -1.0;
  if (distance == 0.0) {
    for (double& g : out) g = tie_sign;
    return;
  }
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double delta = x[c] - y[c];
    if (delta == 0.0) {
      out[c] = k == 1.0 ? tie_sign : 0.0;
      continue;
    }
    const double sign = delta > 0.0 ? 1.0 : -1.0;
    if (k == 1.0) {
      out[c] = sign;
    } else if (k == 2.0) {
      out[c] = delta / distance;
    } else {
      out[c] = sign * std::pow(std::abs(delta) / distance, k - 1.0);
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  const auto rows = static_cast<std::int64_t>(a.rows());
  const bool par = a.rows() * a.cols() * b.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t i = 0; i < rows; ++i) matmul_row(a, b, out, static_cast<std::size_t>(i));
  return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "matmul_at_b");
  Matrix out(a.cols(), b.cols());
  const auto rows = static_cast<std::int64_t>(a.cols());
  const bool par = a.rows() * a.cols() * b.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t p = 0; p < rows; ++p) matmul_at_b_row(a, b, out, static_cast<std::size_t>(p));
  return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "matmul_a_bt");
  Matrix out(a.rows(), b.rows());
  const auto rows = static_cast<std::int64_t>(a.rows());
  const bool par = a.rows() * a.cols() * b.rows() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t i = 0; i < rows; ++i) matmul_a_bt_row(a, b, out, static_cast<std::size_t>(i));
  return out;
}

PairwiseTerms order_pairwise(const Matrix& xbar, std::span<const double> ages, double k) {
  check_order_inputs(xbar, ages);
  const std::size_t n = xbar.rows();
  PairwiseTerms terms{0.0, Matrix(n, xbar.cols())};
  std::vector<double> row_sums(n, 0.0);
  const auto rows = static_cast<std::int64_t>(n);
  const bool par = n * n * xbar.cols() >= kParallelWork;
#pragma omp parallel if (par)
  {
    std::vector<double> scratch(xbar.cols());
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < rows; ++i) {
      const auto r = static_cast<std::size_t>(i);
      row_sums[r] = order_row(xbar, ages, k, r, terms.grad.row(r), scratch);
    }
  }
  // Fixed-order reduction keeps the result independent of the thread count.
  for (double s : row_sums) terms.weighted_sum += s;
  return terms;
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, out, i);
  return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "matmul_at_b");
  Matrix out(a.cols(), b.cols());
  for (std::size_t p = 0; p < a.cols(); ++p) matmul_at_b_row(a, b, out, p);
  return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "matmul_a_bt");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_a_bt_row(a, b, out, i);
  return out;
}

PairwiseTerms order_pairwise(const Matrix& xbar, std::span<const double> ages, double k) {
  check_order_inputs(xbar, ages);
  const std::size_t n = xbar.rows();
  PairwiseTerms terms{0.0, Matrix(n, xbar.cols())};
  std::vector<double> scratch(xbar.cols());
  for (std::size_t i = 0; i < n; ++i) terms.weighted_sum += order_row(xbar, ages, k, i, terms.grad.row(i), scratch);
  return terms;
}

}  // namespace serial

}  // namespace brainage::kernels
