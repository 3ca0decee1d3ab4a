#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "brainage/data.hpp"
#include "brainage/losses.hpp"
#include "brainage/metrics.hpp"
#include "brainage/model.hpp"

namespace brainage {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-2;
  std::size_t batch_size = 4;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 0;
  LossConfig loss;
  /// Unset: by integer-age class for classifier losses, by 4-year bin for regression.
  std::optional<OversampleMode> oversample;

  OversampleMode oversample_mode() const;

  void validate() const;
};

struct AdamWState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  ParamGrads m;
  ParamGrads v;
  std::int64_t t = 0;

  static AdamWState zeros_like(const MlpParams& params);
};

/// One decoupled-weight-decay Adam step, in place:
///   p <- p - lr * mhat / (sqrt(vhat) + eps) - lr * wd * p
/// with the decay applied to the pre-step value of p.
void adamw_step(MlpParams& params, const ParamGrads& grads, AdamWState& state, double lr, double wd);

/// Scalar form of adamw_step for one parameter, used by tests.
struct ScalarAdamW {
  double m = 0.0, v = 0.0;
  std::int64_t t = 0;
  double step(double p, double g, double lr, double wd);
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;
  double wall_seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  bool early_stopped = false;
  std::size_t order_skipped_batches = 0;
};

struct TrainResult {
  MlpParams params;
  TrainHistory history;
};

/// Builds the model config that train_model expects for `loss` on `train`:
/// integer class ages over the training range for classifier kinds.
ModelConfig model_config_for(const Dataset& train, LossKind kind,
                             const std::vector<std::size_t>& hidden_dims);

/// Mini-batch training with per-epoch stratified oversampling and early
/// stopping on validation MAE. Returns the parameters of the best epoch.
/// Throws InvalidParameter on empty data, TrainingDiverged on a non-finite loss.
TrainResult train_model(const ModelConfig& model_config, const TrainConfig& train_config,
                        const Dataset& train, const Dataset& val);

struct Evaluation {
  MetricsReport report;
  Matrix embeddings;  // penultimate activations, input order
  RealVector pred_ages;
};

/// Forward pass over the whole set in fixed-size chunks, then every metric.
/// Metric failures are collected in report.errors rather than thrown.
Evaluation evaluate_model(const MlpParams& params, const Dataset& test);

/// Predicted ages for `data`, chunked forward passes.
RealVector predict_dataset(const MlpParams& params, const Dataset& data, Matrix* embeddings = nullptr);

}  // namespace brainage
