#include "brainage/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brainage/kernels.hpp"

namespace brainage {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Mse: return "mse";
    case LossKind::MseDistance: return "mse_distance";
    case LossKind::Ce: return "ce";
    case LossKind::CeMeanVariance: return "ce_mean_variance";
    case LossKind::CeOrder: return "ce_order";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (LossKind kind : kAllLossKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidParameter("unknown loss kind '" + std::string(name) +
                         "' (expected mse, mse_distance, ce, ce_mean_variance or ce_order)");
}

std::string_view to_string(OrderGradient mode) {
  return mode == OrderGradient::Full ? "full" : "stop";
}

OrderGradient parse_order_gradient(std::string_view name) {
  if (name == "stop") return OrderGradient::StopGradient;
  if (name == "full") return OrderGradient::Full;
  throw InvalidParameter("unknown order gradient '" + std::string(name) + "' (expected stop or full)");
}

bool is_classifier(LossKind kind) {
  return kind == LossKind::Ce || kind == LossKind::CeMeanVariance || kind == LossKind::CeOrder;
}

bool uses_order_term(LossKind kind) {
  return kind == LossKind::CeOrder || kind == LossKind::MseDistance;
}

LossConfig LossConfig::defaults_for(LossKind kind) {
  LossConfig c;
  c.kind = kind;
  if (kind == LossKind::MseDistance) c.k = 2.0;
  return c;
}

void LossConfig::validate() const {
  if (!(k > 0.0) || !std::isfinite(k)) throw InvalidParameter("loss.k must be a positive finite number");
  auto check_weight = [](double w, const char* name) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidParameter(std::string("loss.") + name + " must be finite and nonnegative");
    }
  };
  check_weight(lambda_order, "lambda_order");
  check_weight(lambda_mean, "lambda_mean");
  check_weight(lambda_var, "lambda_var");
  for (std::size_t i = 1; i < class_ages.size(); ++i) {
    if (!(class_ages[i] > class_ages[i - 1])) throw InvalidParameter("loss.class_ages must be strictly increasing");
  }
}

LossOutput cross_entropy(const Matrix& logits, std::span<const int> labels) {
  const std::size_t n = logits.rows();
  const std::size_t classes = logits.cols();
  if (n == 0 || labels.size() != n) throw ContractViolation("cross_entropy: need one label per logit row");

  LossOutput out;
  out.grad_logits = Matrix(n, classes);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ContractViolation("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
    const auto z = logits.row(i);
    double top = z[0];
    for (double v : z) top = std::max(top, v);
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - top);
    const double log_norm = top + std::log(sum);
    total += log_norm - z[label];

    auto g = out.grad_logits.row(i);
    for (std::size_t c = 0; c < classes; ++c) g[c] = std::exp(z[c] - log_norm) * inv_n;
    g[label] -= inv_n;
  }
  out.value = total * inv_n;
  return out;
}

LossOutput mse(std::span<const double> pred_ages, std::span<const double> true_ages) {
  const std::size_t n = pred_ages.size();
  if (n == 0 || true_ages.size() != n) throw ContractViolation("mse: prediction/target length mismatch");
  LossOutput out;
  out.grad_pred.resize(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = pred_ages[i] - true_ages[i];
    total += r * r;
    out.grad_pred[i] = 2.0 * r * inv_n;
  }
  out.value = total * inv_n;
  return out;
}

LossOutput order_regularizer(const Matrix& features, std::span<const double> ages, double k,
                             OrderGradient mode, std::optional<double> fixed_scale) {
  if (!(k > 0.0) || !std::isfinite(k)) throw InvalidParameter("order_regularizer: k must be positive");
  if (ages.size() != features.rows()) throw ContractViolation("order_regularizer: one age per feature row");

  const std::size_t n = features.rows();
  LossOutput out;
  out.grad_features = Matrix(n, features.cols());
  if (n < 2) {
    out.order_skipped = true;
    return out;
  }

  double scale = fixed_scale.value_or(max_row_l2_norm(features));
  const bool degenerate = scale <= 1e-12;
  if (degenerate) scale = 1.0;  // all-zero batch is left as is
  Matrix xbar = features;
  xbar *= 1.0 / scale;

  const kernels::PairwiseTerms terms = kernels::order_pairwise(xbar, ages, k);
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n - 1));
  out.value = -terms.weighted_sum * norm;
  // d xbar / d x = 1/scale with the denominator held constant.
  const double g = -norm / scale;
  auto& grad = out.grad_features.values();
  const auto& src = terms.grad.values();
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = g * src[i];
  if (mode == OrderGradient::Full && !fixed_scale && !degenerate) {
    // L_k is 1-homogeneous, so value = V0 / scale and d value / d scale = -value / scale.
    // The scale is the norm of the first row attaining the maximum.
    std::size_t m = 0;
    double best = -1.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double nr = l2_norm(features.row(r));
      if (nr > best) {
        best = nr;
        m = r;
      }
    }
    auto row = out.grad_features.row(m);
    const double c = -out.value / (scale * scale);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += c * features(m, j);
  }
  return out;
}

MeanVarianceParts mean_variance_parts(const Matrix& probs, std::span<const double> class_ages,
                                      std::span<const double> true_ages) {
  const std::size_t n = probs.rows();
  if (class_ages.size() != probs.cols()) throw ContractViolation("mean_variance: class_ages length != C");
  if (n == 0 || true_ages.size() != n) throw ContractViolation("mean_variance: one target age per row");
  MeanVarianceParts parts;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = probs.row(i);
    double m = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) m += p[c] * class_ages[c];
    double var = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      const double d = class_ages[c] - m;
      var += p[c] * d * d;
    }
    const double r = m - true_ages[i];
    parts.mean_term += 0.5 * r * r;
    parts.variance_term += var;
  }
  parts.mean_term /= static_cast<double>(n);
  parts.variance_term /= static_cast<double>(n);
  return parts;
}

LossOutput mean_variance(const Matrix& logits, std::span<const double> class_ages,
                         std::span<const double> true_ages, double lambda_mean, double lambda_var) {
  const Matrix probs = softmax_rows(logits);
  const MeanVarianceParts parts = mean_variance_parts(probs, class_ages, true_ages);

  const std::size_t n = logits.rows();
  const std::size_t classes = logits.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossOutput out;
  out.value = lambda_mean * parts.mean_term + lambda_var * parts.variance_term;
  out.grad_logits = Matrix(n, classes);
  std::vector<double> dp(classes);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = probs.row(i);
    double m = 0.0;
    for (std::size_t c = 0; c < classes; ++c) m += p[c] * class_ages[c];
    // mean term: (m - t) a_c; variance term sum_c p_c a_c^2 - m^2: a_c^2 - 2 m a_c
    for (std::size_t c = 0; c < classes; ++c) {
      const double a = class_ages[c];
      dp[c] = inv_n * (lambda_mean * (m - true_ages[i]) * a + lambda_var * (a * a - 2.0 * m * a));
    }
    double dot = 0.0;
    for (std::size_t c = 0; c < classes; ++c) dot += p[c] * dp[c];
    auto g = out.grad_logits.row(i);
    for (std::size_t c = 0; c < classes; ++c) g[c] = p[c] * (dp[c] - dot);
  }
  return out;
}

namespace {

void require(bool ok, LossKind kind, const char* what) {
  if (!ok) throw ContractViolation(std::string("total_loss(") + std::string(to_string(kind)) + "): missing " + what);
}

void add_order_term(const LossConfig& config, const LossInputs& in, LossOutput& out) {
  if (config.lambda_order == 0.0) return;
  LossOutput order = order_regularizer(*in.features, in.true_ages, config.k, config.order_gradient, in.order_scale);
  out.value += config.lambda_order * order.value;
  order.grad_features *= config.lambda_order;
  out.grad_features += order.grad_features;
  out.order_skipped = order.order_skipped;
}

}  // namespace

LossOutput total_loss(const LossConfig& config, const LossInputs& in) {
  const LossKind kind = config.kind;
  if (uses_order_term(kind)) require(in.features != nullptr, kind, "features");

  LossOutput out;
  if (is_classifier(kind)) {
    require(in.logits != nullptr, kind, "logits");
    require(in.labels.size() == in.logits->rows(), kind, "labels");
    out = cross_entropy(*in.logits, in.labels);
    if (kind == LossKind::CeMeanVariance) {
      require(in.true_ages.size() == in.logits->rows(), kind, "true_ages");
      const LossOutput mv =
          mean_variance(*in.logits, config.class_ages, in.true_ages, config.lambda_mean, config.lambda_var);
      out.value += mv.value;
      out.grad_logits += mv.grad_logits;
    }
  } else {
    require(in.pred_ages != nullptr, kind, "pred_ages");
    out = mse(*in.pred_ages, in.true_ages);
  }

  const std::size_t n = is_classifier(kind) ? in.logits->rows() : in.pred_ages->size();
  if (in.features != nullptr) {
    if (in.features->rows() != n) throw ContractViolation("total_loss: features/batch row mismatch");
    out.grad_features = Matrix(n, in.features->cols());
  }
  if (uses_order_term(kind)) {
    require(in.true_ages.size() == n, kind, "true_ages");
    add_order_term(config, in, out);
  }
  return out;
}

}  // namespace brainage
