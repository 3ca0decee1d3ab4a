#include <algorithm>
#include <cmath>
#include <string>

#include "brainage/model.hpp"

namespace brainage {

namespace {

struct Problem {
  Matrix batch;
  RealVector ages;
  std::vector<int> labels;
};

Problem make_problem(const ModelConfig& config, std::size_t n, Rng rng) {
  Problem p{Matrix(n, config.input_dim), RealVector(n), std::vector<int>(n, 0)};
  for (double& v : p.batch.values()) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    if (config.head == HeadKind::Classifier) {
      p.labels[i] = static_cast<int>(rng.below(config.class_ages.size()));
      p.ages[i] = config.class_ages[static_cast<std::size_t>(p.labels[i])] + rng.uniform(-0.4, 0.4);
    } else {
      p.ages[i] = rng.uniform(20.0, 80.0);
    }
  }
  return p;
}

struct Evaluated {
  LossOutput loss;
  ForwardResult fwd;
};

Evaluated evaluate(const MlpParams& params, const LossConfig& loss, const Problem& p,
                   std::optional<double> order_scale) {
  Evaluated e{{}, forward(params, p.batch)};
  LossInputs in;
  RealVector pred;
  if (params.config.head == HeadKind::Classifier) {
    in.logits = &e.fwd.output;
    in.labels = p.labels;
  } else {
    pred = predict_age(e.fwd.output, params.config);
    in.pred_ages = &pred;
  }
  in.features = &e.fwd.cache.penultimate();
  in.true_ages = p.ages;
  in.order_scale = order_scale;
  e.loss = total_loss(loss, in);
  return e;
}

double block_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, scale = 1e-8;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return diff / scale;
}

}  // namespace

GradcheckReport gradcheck(const ModelConfig& config, const LossConfig& loss, Rng rng,
                          const GradcheckOptions& options) {
  config.validate();
  loss.validate();
  constexpr std::size_t kMaxDim = 32;
  if (config.input_dim > kMaxDim || config.output_dim() > kMaxDim ||
      std::any_of(config.hidden_dims.begin(), config.hidden_dims.end(), [](std::size_t w) { return w > kMaxDim; })) {
    throw InvalidParameter("gradcheck: every layer width must be <= 32");
  }
  if ((config.head == HeadKind::Classifier) != is_classifier(loss.kind)) {
    throw InvalidParameter("gradcheck: head kind does not match loss kind");
  }

  MlpParams params = init_params(config, rng.split(1));
  Rng bias_rng = rng.split(2);
  for (Layer& layer : params.layers) {
    for (double& b : layer.bias) b = 0.1 * bias_rng.normal();
  }
  const Problem problem = make_problem(config, options.batch, rng.split(3));

  const Evaluated base = evaluate(params, loss, problem, std::nullopt);
  // Stop-gradient treats the batch scale as a constant, so the perturbed passes must too.
  std::optional<double> held_scale;
  if (loss.order_gradient == OrderGradient::StopGradient) {
    held_scale = std::max(max_row_l2_norm(base.fwd.cache.penultimate()), 1e-12);
  }

  Matrix grad_output;
  if (config.head == HeadKind::Classifier) {
    grad_output = base.loss.grad_logits;
  } else {
    grad_output = Matrix(problem.batch.rows(), 1, base.loss.grad_pred);
  }
  ParamGrads analytic = backward(params, base.fwd.cache, grad_output, base.loss.grad_features);

  if (options.corrupt_one_entry) {
    auto& w = analytic.back().weight.values();
    auto it = std::max_element(w.begin(), w.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    *it *= 2.0;
  }

  auto numeric_derivative = [&](double& slot) {
    const double saved = slot;
    slot = saved + options.step;
    const double plus = evaluate(params, loss, problem, held_scale).loss.value;
    slot = saved - options.step;
    const double minus = evaluate(params, loss, problem, held_scale).loss.value;
    slot = saved;
    return (plus - minus) / (2.0 * options.step);
  };

  GradcheckReport report;
  report.kind = loss.kind;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    std::vector<double> num_w, num_b;
    for (double& w : params.layers[l].weight.values()) num_w.push_back(numeric_derivative(w));
    for (double& b : params.layers[l].bias) num_b.push_back(numeric_derivative(b));
    const std::string prefix = "layer" + std::to_string(l);
    report.blocks.push_back({prefix + ".weight", block_error(analytic[l].weight.values(), num_w)});
    report.blocks.push_back({prefix + ".bias", block_error(analytic[l].bias, num_b)});
  }
  for (const auto& b : report.blocks) report.worst = std::max(report.worst, b.max_rel_error);
  report.passed = report.worst < options.tolerance;
  return report;
}

}  // namespace brainage
