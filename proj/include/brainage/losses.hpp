#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "brainage/numerics.hpp"

namespace brainage {

enum class LossKind { Mse, MseDistance, Ce, CeMeanVariance, CeOrder };

inline constexpr LossKind kAllLossKinds[] = {LossKind::Mse, LossKind::MseDistance, LossKind::Ce,
                                             LossKind::CeMeanVariance, LossKind::CeOrder};

std::string_view to_string(LossKind kind);
/// Accepts the canonical names ("mse", "mse_distance", "ce", "ce_mean_variance", "ce_order").
LossKind parse_loss_kind(std::string_view name);

/// Regression kinds predict a scalar age; classifier kinds emit logits over class_ages.
bool is_classifier(LossKind kind);
bool uses_order_term(LossKind kind);

/// How the ORDER term's max-norm denominator enters the backward pass.
enum class OrderGradient { StopGradient, Full };

std::string_view to_string(OrderGradient mode);
/// Accepts "stop" and "full"; throws InvalidParameter otherwise.
OrderGradient parse_order_gradient(std::string_view name);

struct LossConfig {
  LossKind kind = LossKind::CeOrder;
  double k = 1.0;              // L_k exponent of the ORDER distance
  double lambda_order = 0.1;   // weight on the ORDER term
  double lambda_mean = 0.2;
  double lambda_var = 0.05;
  RealVector class_ages;       // age of each class (classifier kinds only)
  OrderGradient order_gradient = OrderGradient::Full;

  /// Per-kind defaults: MseDistance uses Euclidean distance (k = 2).
  static LossConfig defaults_for(LossKind kind);

  /// Throws InvalidParameter on non-positive k, negative/non-finite weights or
  /// non-increasing class ages.
  void validate() const;
};

struct LossOutput {
  double value = 0.0;
  Matrix grad_logits;    // batch x C, empty for regression kinds
  Matrix grad_features;  // batch x d, zero when no feature term applies
  RealVector grad_pred;  // batch, empty for classifier kinds
  bool order_skipped = false;  // set when a batch of one made the ORDER term vacuous
};

LossOutput cross_entropy(const Matrix& logits, std::span<const int> labels);

LossOutput mse(std::span<const double> pred_ages, std::span<const double> true_ages);

/// ORDER regularizer
///   -1/(N(N-1)) sum_{i != j} |age_i - age_j| L_k(xbar_i, xbar_j),  xbar = x / max_i ||x_i||_2.
/// With StopGradient the max-norm denominator is a constant in the backward
/// pass; Full also differentiates through it (via the first row attaining the
/// max). `fixed_scale` replaces the denominator in the forward pass and makes
/// it a true constant, which is what a finite-difference check of the
/// stop-gradient variant has to hold fixed.
LossOutput order_regularizer(const Matrix& features, std::span<const double> ages, double k,
                             OrderGradient mode = OrderGradient::StopGradient,
                             std::optional<double> fixed_scale = std::nullopt);

/// Unweighted mean and variance terms of the mean-variance loss, from probabilities.
struct MeanVarianceParts {
  double mean_term = 0.0;      // 1/(2N) sum_i (m_i - t_i)^2
  double variance_term = 0.0;  // 1/N sum_i sum_c p_ic (age_c - m_i)^2
};
MeanVarianceParts mean_variance_parts(const Matrix& probs, std::span<const double> class_ages,
                                      std::span<const double> true_ages);

/// lambda_mean * mean_term + lambda_var * variance_term, differentiated through softmax(logits).
LossOutput mean_variance(const Matrix& logits, std::span<const double> class_ages,
                         std::span<const double> true_ages, double lambda_mean, double lambda_var);

/// Arguments for total_loss. Classifier kinds need logits and labels; regression
/// kinds need pred_ages; ORDER kinds need features.
struct LossInputs {
  const Matrix* logits = nullptr;
  const Matrix* features = nullptr;
  const RealVector* pred_ages = nullptr;
  std::span<const double> true_ages;
  std::span<const int> labels;
  std::optional<double> order_scale;  // see order_regularizer
};

LossOutput total_loss(const LossConfig& config, const LossInputs& in);

}  // namespace brainage
