#pragma once

// Data-parallel kernels used by the model and the ORDER loss. Every kernel has
// a serial twin in `kernels::serial` with the same per-element summation
// order, so the OpenMP and serial paths agree bit-for-bit at any thread count.
// The serial twins back the equivalence tests and the benchmark.

#include <span>

#include "brainage/numerics.hpp"

namespace brainage::kernels {

/// a (n x k) * b (k x m)
Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b, where a is (n x k) and b is (n x m); reduces over rows of both.
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
/// a * b^T, where a is (n x m) and b is (k x m).
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

/// Raw pairwise sums of the ORDER term over normalized features `xbar`:
///   weighted_sum = sum_{i != j} |age_i - age_j| * L_k(xbar_i, xbar_j)
///   grad.row(i)  = 2 * sum_{j != i} |age_i - age_j| * dL_k(xbar_i, xbar_j)/dxbar_i
struct PairwiseTerms {
  double weighted_sum = 0.0;
  Matrix grad;
};
PairwiseTerms order_pairwise(const Matrix& xbar, std::span<const double> ages, double k);

/// Subgradient of L_k(x, y) with respect to x, written into `out`. At exactly
/// tied coordinates the sign is oriented by `x_first` (+1 when x is the
/// lower-indexed sample) so coincident points are pushed apart.
void lk_distance_grad(std::span<const double> x, std::span<const double> y, double k,
                      double distance, bool x_first, std::span<double> out);

namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);
PairwiseTerms order_pairwise(const Matrix& xbar, std::span<const double> ages, double k);
}  // namespace serial

}  // namespace brainage::kernels
