#pragma once

// Experiment drivers behind the command-line tool. Each driver is a plain
// function so tests can run it in-process.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "brainage/serialize.hpp"

namespace brainage {

struct ExperimentConfig {
  std::uint64_t seed = 0;  // drives sampling, the split and training
  SynthConfig synth;
  SeverityConfig severity = SeverityConfig::defaults();
  std::vector<std::size_t> hidden_dims{64, 64};
  TrainConfig train;
  std::vector<LossKind> losses{std::begin(kAllLossKinds), std::end(kAllLossKinds)};
  std::array<double, 3> split{0.7, 0.15, 0.15};
  std::string out = "out";

  /// Pushes `seed` into synth/train and shares the lifespan feature map with
  /// the severity cohort.
  void propagate();
  /// Canonical JSON (the input of config_hash).
  Json to_json() const;
};

/// Parses an experiment document; missing fields take defaults. Throws ConfigError.
ExperimentConfig experiment_from_json(const Json& j);

/// Enough to re-run a command: `config` is the resolved experiment config
/// (pass it back through --config) and `config_hash` its hash.
struct Provenance {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string command;
  Json config;
  Json to_json() const;
};

Provenance provenance_for(const ExperimentConfig& config, const std::string& command);

struct RunResult {
  LossConfig loss;
  ModelConfig model;
  TrainResult trained;
  Evaluation evaluation;
  std::string config_hash;  // of the experiment config with this loss applied
};

/// Generates the lifespan data of `config` and splits it.
Split make_split(const ExperimentConfig& config);

/// Trains `loss` on split.train/val and evaluates on split.test.
RunResult run_loss(const ExperimentConfig& config, const LossConfig& loss, const Split& split);

/// All configured losses on one shared split; cells may run in parallel.
std::vector<RunResult> run_compare(const ExperimentConfig& config, const Split& split);

struct AblationRow {
  double k = 1.0;
  LossKind kind = LossKind::CeOrder;
  std::optional<double> mae, ordinality, sb_left, sb_right;
  std::string config_hash;
};

inline constexpr double kAblationK[] = {0.5, 2.0 / 3.0, 1.0, 2.0};

/// The k in {1/2, 2/3, 1, 2} x {CeOrder, MseDistance} grid (8 rows, k-major).
std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const Split& split);

/// Severity cohort of `config`, evaluated with `params`.
GroupReport run_severity(const ExperimentConfig& config, const MlpParams& params);

Json checkpoint_json(const MlpParams& params, const TrainConfig& train, const Provenance& prov);
MlpParams params_from_checkpoint(const Json& checkpoint);

Json report_bundle_json(const Provenance& prov, const std::vector<RunResult>& runs,
                        const std::vector<AblationRow>& ablation, const std::optional<GroupReport>& groups);

/// `age,group,e0,...,e{p-1}`, one row per sample in input order.
void write_embeddings_csv(const std::string& path, const Dataset& data, const Matrix& embeddings);

}  // namespace brainage
