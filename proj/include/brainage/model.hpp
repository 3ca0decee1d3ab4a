#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "brainage/losses.hpp"
#include "brainage/numerics.hpp"
#include "brainage/rng.hpp"

namespace brainage {

enum class HeadKind { Classifier, Regressor };

struct ModelConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims{64, 64};
  HeadKind head = HeadKind::Classifier;
  RealVector class_ages;  // classifier only; one entry per output class

  std::size_t output_dim() const { return head == HeadKind::Classifier ? class_ages.size() : 1; }
  /// Throws InvalidParameter: empty hidden_dims, zero widths, bad class ages.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Integer ages lo..hi inclusive.
RealVector integer_class_ages(int lo, int hi);

/// weight is (fan_in x fan_out) so a layer computes y = x W + b.
struct Layer {
  Matrix weight;
  RealVector bias;

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct MlpParams {
  ModelConfig config;
  std::vector<Layer> layers;  // hidden layers (rectified) followed by the linear head

  std::size_t parameter_count() const;
  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Same structure as MlpParams, holding dLoss/dparam.
using ParamGrads = std::vector<Layer>;

struct ForwardCache {
  std::vector<Matrix> activations;      // activations[0] is the input batch
  std::vector<Matrix> pre_activations;  // one per layer
  const Matrix& penultimate() const { return activations.back(); }
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

/// He-normal weights (variance 2/fan_in), zero biases.
MlpParams init_params(const ModelConfig& config, Rng rng);

ForwardResult forward(const MlpParams& params, const Matrix& batch);

/// Gradients of every weight and bias. grad_penultimate is added to the
/// gradient flowing into the last hidden activation (the ORDER feature term).
ParamGrads backward(const MlpParams& params, const ForwardCache& cache, const Matrix& grad_output,
                    const Matrix& grad_penultimate);

/// Classifier: softmax expectation over class ages. Regressor: column 0 as-is.
RealVector predict_age(const Matrix& output, const ModelConfig& head);

struct GradcheckOptions {
  std::size_t batch = 4;
  double step = 1e-6;
  double tolerance = 1e-5;
  bool corrupt_one_entry = false;  // negative control: doubles one analytic entry
};

struct GradcheckBlock {
  std::string name;  // e.g. "layer1.weight"
  double max_rel_error = 0.0;
};

struct GradcheckReport {
  LossKind kind = LossKind::CeOrder;
  std::vector<GradcheckBlock> blocks;
  double worst = 0.0;
  bool passed = false;
};

/// Compares backward() through total_loss with central differences on a
/// random batch and random parameters. `config.input_dim` and every width
/// must be <= 32. Relative error per block is ||analytic - numeric||_inf
/// divided by max(||analytic||_inf, ||numeric||_inf, 1e-8).
GradcheckReport gradcheck(const ModelConfig& config, const LossConfig& loss, Rng rng,
                          const GradcheckOptions& options = {});

}  // namespace brainage
