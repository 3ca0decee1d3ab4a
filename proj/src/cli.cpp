#include "brainage/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <omp.h>

#include "CLI11.hpp"
#include "brainage/experiment.hpp"

namespace brainage {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> loss;
  std::optional<double> k;
  std::optional<double> lambda_order;
  std::optional<std::string> order_gradient;
  std::optional<int> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::string data_path;
  std::string checkpoint_path;
  std::string kind = "lifespan";
  bool timing = false;
};

// One metric failed its precondition; carries the metric name.
struct MetricFailure {
  std::string names;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "Experiment config JSON");
  cmd->add_option("--seed", o.seed, "Seed for sampling, split and training");
  cmd->add_option("--loss", o.loss, "Loss kind: mse, mse_distance, ce, ce_mean_variance, ce_order");
  cmd->add_option("--k", o.k, "L_k exponent of the ORDER distance");
  cmd->add_option("--lambda-order", o.lambda_order, "Weight on the ORDER term");
  cmd->add_option("--order-gradient", o.order_gradient, "ORDER max-norm denominator in backward: stop or full");
  cmd->add_option("--epochs", o.epochs, "Maximum training epochs");
  cmd->add_option("--batch-size", o.batch_size, "Mini-batch size");
  cmd->add_option("--out", o.out, "Output directory (overrides BRAINAGE_OUT and the config)");
  cmd->add_option("--threads", o.threads, "OpenMP worker count");
}

// Precedence: flags > config file > defaults; BRAINAGE_OUT sits between flag and file for --out.
ExperimentConfig load_config(const Options& o) {
  ExperimentConfig c;
  if (!o.config_path.empty()) c = experiment_from_json(read_json_file(o.config_path));
  if (o.seed) c.seed = *o.seed;
  if (o.loss) {
    try {
      const LossKind kind = parse_loss_kind(*o.loss);
      const LossConfig prev = c.train.loss;
      c.train.loss = LossConfig::defaults_for(kind);
      c.train.loss.lambda_order = prev.lambda_order;
      c.train.loss.lambda_mean = prev.lambda_mean;
      c.train.loss.lambda_var = prev.lambda_var;
      c.train.loss.order_gradient = prev.order_gradient;
      c.losses = {kind};
    } catch (const InvalidParameter& e) {
      throw ConfigError(std::string("flag --loss: ") + e.what());
    }
  }
  if (o.k) c.train.loss.k = *o.k;
  if (o.lambda_order) c.train.loss.lambda_order = *o.lambda_order;
  if (o.order_gradient) {
    try {
      c.train.loss.order_gradient = parse_order_gradient(*o.order_gradient);
    } catch (const InvalidParameter& e) {
      throw ConfigError(std::string("flag --order-gradient: ") + e.what());
    }
  }
  if (o.epochs) {
    c.train.max_epochs = *o.epochs;
    c.train.patience = std::min(c.train.patience, *o.epochs);
  }
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (const char* env = std::getenv("BRAINAGE_OUT"); env != nullptr && *env != '\0') c.out = env;
  if (o.out) c.out = *o.out;
  try {
    c.train.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError(std::string("flags: ") + e.what());
  }
  c.propagate();
  return c;
}

// CSV has no room for metadata, so each CSV gets a `<name>.provenance.json` next to it.
void write_csv_with_provenance(const fs::path& path, const Dataset& data, const Provenance& prov) {
  write_csv_file(path.string(), data);
  write_json_file(path.string() + ".provenance.json", Json{{"version", kSchemaVersion}, {"provenance", prov.to_json()}});
}

void write_embeddings_with_provenance(const fs::path& path, const Dataset& data, const Matrix& emb,
                                      const Provenance& prov) {
  write_embeddings_csv(path.string(), data, emb);
  write_json_file(path.string() + ".provenance.json", Json{{"version", kSchemaVersion}, {"provenance", prov.to_json()}});
}

fs::path ensure_out(const ExperimentConfig& c) {
  fs::path dir(c.out);
  fs::create_directories(dir);
  return dir;
}

void check_metrics(const MetricsReport& r) {
  if (r.complete()) return;
  std::string names;
  for (const auto& [name, msg] : r.errors) names += (names.empty() ? "" : ", ") + name + " (" + msg + ")";
  throw MetricFailure{names};
}

int cmd_gen_data(const Options& o, std::ostream& out) {
  const ExperimentConfig c = load_config(o);
  const fs::path dir = ensure_out(c);
  Dataset data;
  if (o.kind == "lifespan") {
    data = generate_lifespan(c.synth);
  } else if (o.kind == "severity") {
    data = generate_severity(c.severity);
  } else {
    throw ConfigError("flag --kind: expected 'lifespan' or 'severity'");
  }
  const fs::path path = dir / (o.kind + ".csv");
  write_csv_with_provenance(path, data, provenance_for(c, "gen-data"));
  out << "wrote " << data.size() << " samples to " << path.string() << "\n";
  return kExitOk;
}

Split split_for(const ExperimentConfig& c, const Options& o) {
  if (o.data_path.empty()) return make_split(c);
  return stratified_split(read_csv_file(o.data_path), c.split, c.seed);
}

int cmd_train(const Options& o, std::ostream& out) {
  const ExperimentConfig c = load_config(o);
  const fs::path dir = ensure_out(c);
  const Split split = split_for(c, o);
  const ModelConfig model = model_config_for(split.train, c.train.loss.kind, c.hidden_dims);
  const TrainResult result = train_model(model, c.train, split.train, split.val);
  const Provenance prov = provenance_for(c, "train");

  write_json_file((dir / "checkpoint.json").string(), checkpoint_json(result.params, c.train, prov));
  Json history = to_json(result.history, o.timing);
  history["provenance"] = prov.to_json();
  write_json_file((dir / "history.json").string(), history);
  write_csv_with_provenance(dir / "test.csv", split.test, prov);
  out << to_string(c.train.loss.kind) << ": best epoch " << result.history.best_epoch << " of "
      << result.history.epochs.size() << ", val MAE " << result.history.epochs[result.history.best_epoch - 1].val_mae
      << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, bool embeddings_only) {
  if (o.checkpoint_path.empty() || o.data_path.empty()) throw ConfigError("--checkpoint and --data are required");
  const ExperimentConfig c = load_config(o);
  const fs::path dir = ensure_out(c);
  const MlpParams params = params_from_checkpoint(read_json_file(o.checkpoint_path));
  const Dataset data = read_csv_file(o.data_path);
  const Provenance prov = provenance_for(c, embeddings_only ? "embed" : "eval");
  if (embeddings_only) {
    Matrix emb;
    predict_dataset(params, data, &emb);
    write_embeddings_with_provenance(dir / "embeddings.csv", data, emb, prov);
    out << "wrote " << (dir / "embeddings.csv").string() << "\n";
    return kExitOk;
  }
  const Evaluation ev = evaluate_model(params, data);
  Json report = to_json(ev.report);
  report["version"] = kSchemaVersion;
  report["provenance"] = prov.to_json();
  write_json_file((dir / "metrics.json").string(), report);
  write_embeddings_with_provenance(dir / "embeddings.csv", data, ev.embeddings, prov);
  out << report.dump(2) << "\n";
  check_metrics(ev.report);
  return kExitOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  const ExperimentConfig c = load_config(o);
  const fs::path dir = ensure_out(c);
  const Split split = split_for(c, o);
  const std::vector<RunResult> runs = run_compare(c, split);
  const Provenance prov = provenance_for(c, "compare");
  for (const RunResult& r : runs) {
    const std::string name(to_string(r.loss.kind));
    TrainConfig train = c.train;
    train.loss = r.loss;
    Provenance cell = prov;
    cell.config_hash = r.config_hash;
    cell.config = Json{{"experiment", prov.config}, {"loss", to_json(r.loss)}};
    write_json_file((dir / ("checkpoint_" + name + ".json")).string(), checkpoint_json(r.trained.params, train, cell));
    write_embeddings_with_provenance(dir / ("embeddings_" + name + ".csv"), split.test, r.evaluation.embeddings, cell);
  }
  write_json_file((dir / "report.json").string(), report_bundle_json(prov, runs, {}, std::nullopt));
  for (const RunResult& r : runs) {
    const MetricsReport& m = r.evaluation.report;
    out << to_string(r.loss.kind) << ": MAE " << (m.mae ? *m.mae : NAN) << ", ordinality "
        << (m.ordinality ? *m.ordinality : NAN) << ", SB-L " << (m.bias ? m.bias->sb_left : NAN) << ", SB-R "
        << (m.bias ? m.bias->sb_right : NAN) << "\n";
  }
  for (const RunResult& r : runs) check_metrics(r.evaluation.report);
  return kExitOk;
}

int cmd_ablate(const Options& o, std::ostream& out) {
  const ExperimentConfig c = load_config(o);
  const fs::path dir = ensure_out(c);
  const Split split = split_for(c, o);
  const std::vector<AblationRow> rows = run_ablation(c, split);
  write_json_file((dir / "ablation.json").string(),
                  report_bundle_json(provenance_for(c, "ablate"), {}, rows, std::nullopt));
  std::string missing;
  for (const AblationRow& r : rows) {
    out << "k=" << r.k << " " << to_string(r.kind) << ": MAE " << (r.mae ? *r.mae : NAN) << ", ordinality "
        << (r.ordinality ? *r.ordinality : NAN) << "\n";
    if (!r.mae || !r.ordinality || !r.sb_left) missing = "ablation cell k=" + format_double(r.k) + " " + std::string(to_string(r.kind));
  }
  if (!missing.empty()) throw MetricFailure{missing};
  return kExitOk;
}

int cmd_severity(const Options& o, std::ostream& out) {
  const ExperimentConfig c = load_config(o);
  const fs::path dir = ensure_out(c);
  MlpParams params;
  if (!o.checkpoint_path.empty()) {
    params = params_from_checkpoint(read_json_file(o.checkpoint_path));
  } else {
    params = run_loss(c, c.train.loss, split_for(c, o)).trained.params;
  }
  const GroupReport report = run_severity(c, params);
  Json doc{{"version", kSchemaVersion}, {"provenance", provenance_for(c, "severity").to_json()}, {"group_report", to_json(report)}};
  write_json_file((dir / "group_report.json").string(), doc);
  for (std::size_t g = 0; g < report.labels.size(); ++g) {
    out << report.labels[g] << ": mean gap " << report.mean_gap[g] << " (n=" << report.counts[g] << ")\n";
  }
  out << "severity correlation " << report.severity_correlation << "\n";
  return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  const std::uint64_t seed = o.seed.value_or(0);
  bool ok = true;
  for (LossKind kind : kAllLossKinds) {
    ModelConfig model;
    model.input_dim = 16;
    model.hidden_dims = {16, 16};
    model.head = is_classifier(kind) ? HeadKind::Classifier : HeadKind::Regressor;
    if (model.head == HeadKind::Classifier) model.class_ages = integer_class_ages(30, 39);
    LossConfig loss = LossConfig::defaults_for(kind);
    loss.class_ages = model.class_ages;
    const GradcheckReport report = gradcheck(model, loss, Rng(seed, 0));
    out << to_string(kind) << ": worst relative error " << report.worst << (report.passed ? " ok" : " FAIL") << "\n";
    ok = ok && report.passed;
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ORDER loss, baselines and ordinality / systematic-bias metrics on synthetic ordinal data"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset CSV");
  add_common(gen, o);
  gen->add_option("--kind", o.kind, "lifespan or severity");

  auto* train = app.add_subcommand("train", "Train one loss; write checkpoint, history and the test split");
  add_common(train, o);
  train->add_option("--data", o.data_path, "Dataset CSV (default: generate from the config)");
  train->add_flag("--timing", o.timing, "Record per-epoch wall time in history.json");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset CSV");
  add_common(eval, o);
  eval->add_option("--checkpoint", o.checkpoint_path, "Checkpoint JSON");
  eval->add_option("--data", o.data_path, "Dataset CSV");

  auto* compare = app.add_subcommand("compare", "Train and evaluate every loss on one split");
  add_common(compare, o);
  compare->add_option("--data", o.data_path, "Dataset CSV (default: generate from the config)");

  auto* ablate = app.add_subcommand("ablate", "k x {ce_order, mse_distance} ablation grid");
  add_common(ablate, o);
  ablate->add_option("--data", o.data_path, "Dataset CSV (default: generate from the config)");

  auto* severity = app.add_subcommand("severity", "Group BrainAGE report on the synthetic severity cohort");
  add_common(severity, o);
  severity->add_option("--checkpoint", o.checkpoint_path, "Checkpoint JSON (default: train the configured loss)");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every loss through the network");
  add_common(grad, o);

  auto* embed = app.add_subcommand("embed", "Write penultimate embeddings of a dataset");
  add_common(embed, o);
  embed->add_option("--checkpoint", o.checkpoint_path, "Checkpoint JSON");
  embed->add_option("--data", o.data_path, "Dataset CSV");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadConfig;
  }

  if (o.threads) {
    if (*o.threads < 1) {
      err << "error: --threads must be positive\n";
      return kExitBadConfig;
    }
    omp_set_num_threads(*o.threads);
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o, out);
    if (train->parsed()) return cmd_train(o, out);
    if (eval->parsed()) return cmd_eval(o, out, false);
    if (compare->parsed()) return cmd_compare(o, out);
    if (ablate->parsed()) return cmd_ablate(o, out);
    if (severity->parsed()) return cmd_severity(o, out);
    if (grad->parsed()) return cmd_gradcheck(o, out);
    if (embed->parsed()) return cmd_eval(o, out, true);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const MetricFailure& e) {
    err << "metric precondition failed: " << e.names << "\n";
    return kExitMetricPrecondition;
  } catch (const TrainingDiverged& e) {
    err << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const InsufficientSamples& e) {
    err << "metric precondition failed: " << e.what() << "\n";
    return kExitMetricPrecondition;
  } catch (const DegenerateInput& e) {
    err << "metric precondition failed: " << e.what() << "\n";
    return kExitMetricPrecondition;
  } catch (const InvalidParameter& e) {
    err << "config error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace brainage
