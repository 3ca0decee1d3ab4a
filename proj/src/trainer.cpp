#include "brainage/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace brainage {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kEpochStreamBase = 1000;
constexpr std::size_t kEvalChunk = 256;

void adamw_update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                  std::vector<double>& v, double lr, double wd, double bc1, double bc2) {
  const double decay = 1.0 - lr * wd;
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = AdamWState::kBeta1 * m[i] + (1.0 - AdamWState::kBeta1) * g[i];
    v[i] = AdamWState::kBeta2 * v[i] + (1.0 - AdamWState::kBeta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] = p[i] * decay - lr * mhat / (std::sqrt(vhat) + AdamWState::kEps);
  }
}

struct Batch {
  Matrix x;
  RealVector ages;
  std::vector<int> labels;
};

Batch make_batch(const Dataset& data, std::size_t begin, std::size_t end, std::span<const double> class_ages) {
  Batch b;
  const std::size_t n = end - begin;
  b.x = Matrix(n, data[begin].features.size());
  b.ages.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = data[begin + i];
    std::copy(s.features.begin(), s.features.end(), b.x.row(i).begin());
    b.ages[i] = s.chron_age;
  }
  if (!class_ages.empty()) {
    const Dataset slice(data.begin() + static_cast<std::ptrdiff_t>(begin), data.begin() + static_cast<std::ptrdiff_t>(end));
    b.labels = class_labels(slice, class_ages);
  }
  return b;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidParameter("train.learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw InvalidParameter("train.weight_decay must be nonnegative");
  if (batch_size == 0) throw InvalidParameter("train.batch_size must be positive");
  if (max_epochs <= 0) throw InvalidParameter("train.max_epochs must be positive");
  if (patience <= 0 || patience > max_epochs) throw InvalidParameter("train.patience must lie in [1, max_epochs]");
  loss.validate();
}

OversampleMode TrainConfig::oversample_mode() const {
  if (oversample) return *oversample;
  return is_classifier(loss.kind) ? OversampleMode::ByClass : OversampleMode::ByAgeBin;
}

AdamWState AdamWState::zeros_like(const MlpParams& params) {
  AdamWState s;
  for (const Layer& l : params.layers) {
    Layer z{Matrix(l.weight.rows(), l.weight.cols()), RealVector(l.bias.size(), 0.0)};
    s.m.push_back(z);
    s.v.push_back(std::move(z));
  }
  return s;
}

void adamw_step(MlpParams& params, const ParamGrads& grads, AdamWState& state, double lr, double wd) {
  if (grads.size() != params.layers.size() || state.m.size() != params.layers.size()) {
    throw ContractViolation("adamw_step: gradient/state structure does not match parameters");
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(AdamWState::kBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(AdamWState::kBeta2, static_cast<double>(state.t));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Layer& p = params.layers[l];
    if (!grads[l].weight.same_shape(p.weight) || grads[l].bias.size() != p.bias.size()) {
      throw ContractViolation("adamw_step: gradient shape mismatch in layer " + std::to_string(l));
    }
    adamw_update(p.weight.values(), grads[l].weight.values(), state.m[l].weight.values(),
                 state.v[l].weight.values(), lr, wd, bc1, bc2);
    adamw_update(p.bias, grads[l].bias, state.m[l].bias, state.v[l].bias, lr, wd, bc1, bc2);
  }
}

double ScalarAdamW::step(double p, double g, double lr, double wd) {
  ++t;
  std::vector<double> pv{p}, gv{g}, mv{m}, vv{v};
  adamw_update(pv, gv, mv, vv, lr, wd, 1.0 - std::pow(AdamWState::kBeta1, static_cast<double>(t)),
               1.0 - std::pow(AdamWState::kBeta2, static_cast<double>(t)));
  m = mv[0];
  v = vv[0];
  return pv[0];
}

ModelConfig model_config_for(const Dataset& train, LossKind kind, const std::vector<std::size_t>& hidden_dims) {
  if (train.empty()) throw InvalidParameter("model_config_for: empty training set");
  ModelConfig config;
  config.input_dim = train.front().features.size();
  config.hidden_dims = hidden_dims;
  if (is_classifier(kind)) {
    config.head = HeadKind::Classifier;
    config.class_ages = round_to_classes(train).class_ages;
  } else {
    config.head = HeadKind::Regressor;
  }
  return config;
}

RealVector predict_dataset(const MlpParams& params, const Dataset& data, Matrix* embeddings) {
  RealVector ages;
  ages.reserve(data.size());
  if (embeddings != nullptr) *embeddings = Matrix(data.size(), params.config.hidden_dims.back());
  for (std::size_t begin = 0; begin < data.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(data.size(), begin + kEvalChunk);
    const Batch b = make_batch(data, begin, end, {});
    const ForwardResult fwd = forward(params, b.x);
    const RealVector chunk = predict_age(fwd.output, params.config);
    ages.insert(ages.end(), chunk.begin(), chunk.end());
    if (embeddings != nullptr) {
      const Matrix& pen = fwd.cache.penultimate();
      std::copy(pen.values().begin(), pen.values().end(), embeddings->row(begin).begin());
    }
  }
  return ages;
}

TrainResult train_model(const ModelConfig& model_config, const TrainConfig& train_config, const Dataset& train,
                        const Dataset& val) {
  if (train.empty() || val.empty()) throw InvalidParameter("train_model: training and validation sets must be nonempty");
  model_config.validate();
  train_config.validate();
  const LossKind kind = train_config.loss.kind;
  if (is_classifier(kind) != (model_config.head == HeadKind::Classifier)) {
    throw InvalidParameter("train_model: loss '" + std::string(to_string(kind)) + "' does not match the model head");
  }

  LossConfig loss = train_config.loss;
  loss.class_ages = model_config.class_ages;

  MlpParams params = init_params(model_config, Rng(train_config.seed, kInitStream));
  if (model_config.head == HeadKind::Regressor) {
    // Start the scalar head at the mean training age instead of zero.
    double mean = 0.0;
    for (const Sample& s : train) mean += s.chron_age;
    params.layers.back().bias[0] = mean / static_cast<double>(train.size());
  }
  AdamWState state = AdamWState::zeros_like(params);

  TrainResult result{params, {}};
  const RealVector val_ages = ages_of(val);
  double best_mae = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    Rng rng(train_config.seed, kEpochStreamBase + static_cast<std::uint64_t>(epoch));
    const Dataset epoch_data = stratified_oversample(train, train_config.oversample_mode(), rng);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < epoch_data.size(); begin += train_config.batch_size) {
      const std::size_t end = std::min(epoch_data.size(), begin + train_config.batch_size);
      const Batch b = make_batch(epoch_data, begin, end, model_config.class_ages);
      const ForwardResult fwd = forward(params, b.x);

      LossInputs in;
      RealVector pred;
      if (model_config.head == HeadKind::Classifier) {
        in.logits = &fwd.output;
        in.labels = b.labels;
      } else {
        pred = predict_age(fwd.output, model_config);
        in.pred_ages = &pred;
      }
      in.features = &fwd.cache.penultimate();
      in.true_ages = b.ages;
      const LossOutput out = total_loss(loss, in);
      if (!std::isfinite(out.value)) {
        throw TrainingDiverged(epoch, "training diverged: non-finite loss in epoch " + std::to_string(epoch));
      }
      if (out.order_skipped) ++result.history.order_skipped_batches;
      loss_sum += out.value * static_cast<double>(end - begin);

      const Matrix grad_output = model_config.head == HeadKind::Classifier
                                     ? out.grad_logits
                                     : Matrix(end - begin, 1, out.grad_pred);
      const ParamGrads grads = backward(params, fwd.cache, grad_output, out.grad_features);
      adamw_step(params, grads, state, train_config.learning_rate, train_config.weight_decay);
    }

    const double val_mae = mae(predict_dataset(params, val), val_ages);
    if (!std::isfinite(val_mae)) {
      throw TrainingDiverged(epoch, "training diverged: non-finite validation MAE in epoch " + std::to_string(epoch));
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.epochs.push_back({epoch, loss_sum / static_cast<double>(epoch_data.size()), val_mae, seconds});

    if (val_mae < best_mae) {
      best_mae = val_mae;
      result.params = params;
      result.history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= train_config.patience) {
      result.history.early_stopped = epoch < train_config.max_epochs;
      break;
    }
  }
  return result;
}

Evaluation evaluate_model(const MlpParams& params, const Dataset& test) {
  if (test.empty()) throw InvalidParameter("evaluate_model: empty test set");
  Evaluation ev;
  ev.pred_ages = predict_dataset(params, test, &ev.embeddings);
  const RealVector truth = ages_of(test);
  MetricsReport& r = ev.report;
  r.n = test.size();
  for (double a : truth) ++r.per_class_counts[round_age(a)];

  auto attempt = [&r](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      r.errors[name] = e.what();
    }
  };
  attempt("mae", [&] { r.mae = mae(ev.pred_ages, truth); });
  attempt("ordinality", [&] { r.ordinality = ordinality_score(ev.embeddings, truth); });
  attempt("systematic_bias", [&] { r.bias = systematic_bias(ev.pred_ages, truth); });
  return ev;
}

}  // namespace brainage
