#include "brainage/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brainage/kernels.hpp"

namespace brainage {

void ModelConfig::validate() const {
  if (input_dim == 0) throw InvalidParameter("model: input_dim must be positive");
  if (hidden_dims.empty()) throw InvalidParameter("model: at least one hidden layer is required (penultimate features)");
  for (std::size_t w : hidden_dims) {
    if (w == 0) throw InvalidParameter("model: hidden widths must be positive");
  }
  if (head == HeadKind::Classifier) {
    if (class_ages.size() < 2) throw InvalidParameter("model: classifier head needs at least two classes");
    for (std::size_t i = 1; i < class_ages.size(); ++i) {
      if (!(class_ages[i] > class_ages[i - 1])) throw InvalidParameter("model: class_ages must be strictly increasing");
    }
  }
}

RealVector integer_class_ages(int lo, int hi) {
  RealVector ages;
  for (int a = lo; a <= hi; ++a) ages.push_back(static_cast<double>(a));
  return ages;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t total = 0;
  for (const Layer& l : layers) total += l.weight.size() + l.bias.size();
  return total;
}

MlpParams init_params(const ModelConfig& config, Rng rng) {
  config.validate();
  MlpParams params;
  params.config = config;
  std::vector<std::size_t> dims{config.input_dim};
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  dims.push_back(config.output_dim());
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer layer{Matrix(dims[l], dims[l + 1]), RealVector(dims[l + 1], 0.0)};
    const double sd = std::sqrt(2.0 / static_cast<double>(dims[l]));
    for (double& w : layer.weight.values()) w = sd * rng.normal();
    params.layers.push_back(std::move(layer));
  }
  return params;
}

ForwardResult forward(const MlpParams& params, const Matrix& batch) {
  if (batch.cols() != params.config.input_dim) {
    throw ContractViolation("forward: batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                            std::to_string(params.config.input_dim));
  }
  ForwardResult result;
  auto& cache = result.cache;
  cache.activations.push_back(batch);
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Layer& layer = params.layers[l];
    Matrix z = kernels::matmul(cache.activations.back(), layer.weight);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto row = z.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
    }
    if (l == last) {
      result.output = z;
      cache.pre_activations.push_back(std::move(z));
      break;
    }
    Matrix a = z;
    for (double& v : a.values()) v = v > 0.0 ? v : 0.0;
    cache.pre_activations.push_back(std::move(z));
    cache.activations.push_back(std::move(a));
  }
  return result;
}

ParamGrads backward(const MlpParams& params, const ForwardCache& cache, const Matrix& grad_output,
                    const Matrix& grad_penultimate) {
  const std::size_t n_layers = params.layers.size();
  const std::size_t batch = cache.activations.front().rows();
  if (grad_output.rows() != batch || grad_output.cols() != params.layers.back().weight.cols()) {
    throw ContractViolation("backward: grad_output shape does not match the forward output");
  }
  if (!grad_penultimate.same_shape(cache.penultimate())) {
    throw ContractViolation("backward: grad_penultimate shape does not match the penultimate activations");
  }

  ParamGrads grads(n_layers);
  Matrix delta = grad_output;  // dL/dz for the current layer
  for (std::size_t l = n_layers; l-- > 0;) {
    const Matrix& input = cache.activations[l];
    grads[l].weight = kernels::matmul_at_b(input, delta);
    grads[l].bias.assign(delta.cols(), 0.0);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const auto row = delta.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) grads[l].bias[c] += row[c];
    }
    if (l == 0) break;

    Matrix grad_act = kernels::matmul_a_bt(delta, params.layers[l].weight);
    if (l == n_layers - 1) grad_act += grad_penultimate;
    const Matrix& pre = cache.pre_activations[l - 1];
    for (std::size_t i = 0; i < grad_act.size(); ++i) {
      if (!(pre.values()[i] > 0.0)) grad_act.values()[i] = 0.0;
    }
    delta = std::move(grad_act);
  }
  return grads;
}

RealVector predict_age(const Matrix& output, const ModelConfig& head) {
  RealVector ages(output.rows());
  if (head.head == HeadKind::Regressor) {
    if (output.cols() != 1) throw ContractViolation("predict_age: regressor output must be N x 1");
    for (std::size_t r = 0; r < output.rows(); ++r) ages[r] = output(r, 0);
    return ages;
  }
  if (output.cols() != head.class_ages.size()) throw ContractViolation("predict_age: logits width != class count");
  for (std::size_t r = 0; r < output.rows(); ++r) {
    const RealVector p = stable_softmax(output.row(r));
    double m = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) m += p[c] * head.class_ages[c];
    ages[r] = m;
  }
  return ages;
}

}  // namespace brainage
