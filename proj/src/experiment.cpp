#include "brainage/experiment.hpp"

#include <exception>
#include <fstream>
#include <map>

namespace brainage {

namespace {

constexpr std::uint64_t kInitStream = 1;  // matches train_model

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("field '" + path + "': " + what);
}

SeverityConfig severity_from_json(const Json& j, SeverityConfig c) {
  if (!j.is_object()) fail("severity", "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "age_lo" || key == "age_hi") {
      if (!value.is_number()) fail("severity." + key, "expected a number");
      (key == "age_lo" ? c.base.age_lo : c.base.age_hi) = value.get<double>();
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) fail("severity.seed", "expected a nonnegative integer");
      c.base.seed = value.get<std::uint64_t>();
    } else if (key == "groups") {
      if (!value.is_array() || value.empty()) fail("severity.groups", "expected a nonempty array");
      c.groups.clear();
      for (std::size_t g = 0; g < value.size(); ++g) {
        const std::string path = "severity.groups[" + std::to_string(g) + "]";
        const Json& gj = value.at(g);
        if (!gj.is_object() || !gj.contains("label") || !gj.at("label").is_string() || !gj.contains("count") ||
            !gj.at("count").is_number_unsigned() || !gj.contains("gap_offset") || !gj.at("gap_offset").is_number()) {
          fail(path, "expected {label: string, count: integer, gap_offset: number}");
        }
        c.groups.push_back({gj.at("label").get<std::string>(), gj.at("count").get<std::size_t>(),
                            gj.at("gap_offset").get<double>()});
      }
    } else {
      fail("severity." + key, "unknown field");
    }
  }
  return c;
}

template <typename Fn>
void parallel_cells(std::size_t count, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

void ExperimentConfig::propagate() {
  synth.seed = seed;
  train.seed = seed;
  SynthConfig& base = severity.base;
  base.d = synth.d;
  base.noise_sigma = synth.noise_sigma;
  base.nuisance_sigma = synth.nuisance_sigma;
  base.signal_dims = synth.signal_dims;
  base.non_integer_fraction = synth.non_integer_fraction;
  base.shape_seed = synth.shape_seed;
  base.distribution = AgeDistribution::Uniform;
}

Json ExperimentConfig::to_json() const {
  Json losses_json = Json::array();
  for (LossKind k : losses) losses_json.push_back(std::string(to_string(k)));
  Json groups = Json::array();
  for (const auto& g : severity.groups) groups.push_back(Json{{"label", g.label}, {"count", g.count}, {"gap_offset", g.gap_offset}});
  return Json{{"version", kSchemaVersion},
              {"seed", seed},
              {"synth", brainage::to_json(synth)},
              {"severity", Json{{"groups", groups},
                                {"age_lo", severity.base.age_lo},
                                {"age_hi", severity.base.age_hi},
                                {"seed", severity.base.seed}}},
              {"model", Json{{"hidden_dims", hidden_dims}}},
              {"train", brainage::to_json(train)},
              {"losses", losses_json},
              {"split", split}};
}

ExperimentConfig experiment_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("experiment config: expected a JSON object");
  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "version") {
      if (!value.is_number_integer() || value.get<std::int64_t>() != kSchemaVersion) fail("version", "unsupported version");
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) fail("seed", "expected a nonnegative integer");
      c.seed = value.get<std::uint64_t>();
    } else if (key == "synth") {
      c.synth = synth_config_from_json(value, "synth");
    } else if (key == "severity") {
      c.severity = severity_from_json(value, c.severity);
    } else if (key == "model") {
      if (!value.is_object()) fail("model", "expected an object");
      for (const auto& [mk, mv] : value.items()) {
        if (mk != "hidden_dims") fail("model." + mk, "unknown field");
        if (!mv.is_array() || mv.empty()) fail("model.hidden_dims", "expected a nonempty array of positive integers");
        c.hidden_dims.clear();
        for (const Json& w : mv) {
          if (!w.is_number_unsigned() || w.get<std::size_t>() == 0) fail("model.hidden_dims", "expected positive integers");
          c.hidden_dims.push_back(w.get<std::size_t>());
        }
      }
    } else if (key == "train") {
      c.train = train_config_from_json(value, "train");
    } else if (key == "losses") {
      if (!value.is_array() || value.empty()) fail("losses", "expected a nonempty array of loss names");
      c.losses.clear();
      for (const Json& name : value) {
        if (!name.is_string()) fail("losses", "expected loss names");
        try {
          c.losses.push_back(parse_loss_kind(name.get<std::string>()));
        } catch (const InvalidParameter& e) {
          fail("losses", e.what());
        }
      }
    } else if (key == "split") {
      if (!value.is_array() || value.size() != 3) fail("split", "expected [train, val, test] fractions");
      for (std::size_t i = 0; i < 3; ++i) {
        if (!value.at(i).is_number()) fail("split", "expected numbers");
        c.split[i] = value.at(i).get<double>();
      }
      const double total = c.split[0] + c.split[1] + c.split[2];
      if (std::abs(total - 1.0) > 1e-9 || c.split[0] <= 0 || c.split[1] <= 0 || c.split[2] <= 0) {
        fail("split", "fractions must be positive and sum to 1");
      }
    } else if (key == "out") {
      if (!value.is_string()) fail("out", "expected a path string");
      c.out = value.get<std::string>();
    } else {
      fail(key, "unknown field");
    }
  }
  try {
    c.severity.validate();
  } catch (const InvalidParameter& e) {
    fail("severity", e.what());
  }
  c.propagate();
  return c;
}

Json Provenance::to_json() const {
  return Json{{"seed", seed},
              {"config_hash", config_hash},
              {"tool_version", kToolVersion},
              {"command", command},
              {"config", config}};
}

Provenance provenance_for(const ExperimentConfig& config, const std::string& command) {
  Json j = config.to_json();
  return {config.seed, brainage::config_hash(j), command, std::move(j)};
}

Split make_split(const ExperimentConfig& config) {
  return stratified_split(generate_lifespan(config.synth), config.split, config.seed);
}

RunResult run_loss(const ExperimentConfig& config, const LossConfig& loss, const Split& split) {
  RunResult r;
  r.loss = loss;
  r.model = model_config_for(split.train, loss.kind, config.hidden_dims);
  TrainConfig train = config.train;
  train.loss = loss;
  r.trained = train_model(r.model, train, split.train, split.val);
  r.evaluation = evaluate_model(r.trained.params, split.test);
  r.config_hash = config_hash(Json{{"experiment", config.to_json()}, {"loss", to_json(loss)}});
  return r;
}

std::vector<RunResult> run_compare(const ExperimentConfig& config, const Split& split) {
  std::vector<RunResult> runs(config.losses.size());
  parallel_cells(runs.size(), [&](std::size_t i) {
    LossConfig loss = LossConfig::defaults_for(config.losses[i]);
    loss.lambda_order = config.train.loss.lambda_order;
    loss.lambda_mean = config.train.loss.lambda_mean;
    loss.lambda_var = config.train.loss.lambda_var;
    loss.order_gradient = config.train.loss.order_gradient;
    runs[i] = run_loss(config, loss, split);
  });
  return runs;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const Split& split) {
  std::vector<LossConfig> cells;
  for (double k : kAblationK) {
    for (LossKind kind : {LossKind::CeOrder, LossKind::MseDistance}) {
      LossConfig loss = LossConfig::defaults_for(kind);
      loss.k = k;
      loss.lambda_order = config.train.loss.lambda_order;
      loss.order_gradient = config.train.loss.order_gradient;
      cells.push_back(loss);
    }
  }
  std::vector<AblationRow> rows(cells.size());
  parallel_cells(cells.size(), [&](std::size_t i) {
    const RunResult run = run_loss(config, cells[i], split);
    const MetricsReport& m = run.evaluation.report;
    AblationRow& row = rows[i];
    row.k = cells[i].k;
    row.kind = cells[i].kind;
    row.mae = m.mae;
    row.ordinality = m.ordinality;
    if (m.bias) {
      row.sb_left = m.bias->sb_left;
      row.sb_right = m.bias->sb_right;
    }
    row.config_hash = run.config_hash;
  });
  return rows;
}

GroupReport run_severity(const ExperimentConfig& config, const MlpParams& params) {
  const Dataset data = generate_severity(config.severity);
  std::vector<std::string> labels;
  std::map<std::string, std::size_t> index;
  for (const auto& g : config.severity.groups) {
    index.emplace(g.label, labels.size());
    labels.push_back(g.label);
  }
  std::vector<std::size_t> group_of;
  for (const Sample& s : data) group_of.push_back(index.at(s.group));
  const RealVector pred = predict_dataset(params, data);
  return group_report(pred, ages_of(data), group_of, labels);
}

Json checkpoint_json(const MlpParams& params, const TrainConfig& train, const Provenance& prov) {
  return Json{{"version", kSchemaVersion},
              {"kind", "checkpoint"},
              {"model", to_json(params)},
              {"train_config", to_json(train)},
              {"rng", Json{{"algorithm", "philox4x32-10"}, {"version", Rng::kVersion}, {"seed", train.seed}, {"stream", kInitStream}}},
              {"provenance", prov.to_json()}};
}

MlpParams params_from_checkpoint(const Json& checkpoint) {
  if (!checkpoint.is_object() || !checkpoint.contains("model")) throw ConfigError("field 'model': checkpoint has no model");
  if (!checkpoint.contains("version") || checkpoint.at("version") != kSchemaVersion) {
    throw ConfigError("field 'version': unsupported checkpoint version");
  }
  return params_from_json(checkpoint.at("model"), "model");
}

Json report_bundle_json(const Provenance& prov, const std::vector<RunResult>& runs,
                        const std::vector<AblationRow>& ablation, const std::optional<GroupReport>& groups) {
  Json results = Json::array();
  for (const RunResult& r : runs) {
    results.push_back(Json{{"loss", std::string(to_string(r.loss.kind))},
                           {"loss_config", to_json(r.loss)},
                           {"config_hash", r.config_hash},
                           {"best_epoch", r.trained.history.best_epoch},
                           {"epochs_run", r.trained.history.epochs.size()},
                           {"metrics", to_json(r.evaluation.report)}});
  }
  Json rows = Json::array();
  for (const AblationRow& a : ablation) {
    rows.push_back(Json{{"k", a.k},
                        {"loss", std::string(to_string(a.kind))},
                        {"mae", optional_number(a.mae)},
                        {"ordinality", optional_number(a.ordinality)},
                        {"sb_left", optional_number(a.sb_left)},
                        {"sb_right", optional_number(a.sb_right)},
                        {"config_hash", a.config_hash}});
  }
  Json bundle{{"version", kSchemaVersion}, {"provenance", prov.to_json()}, {"results", results}, {"ablation", rows}};
  bundle["group_report"] = groups ? to_json(*groups) : Json(nullptr);
  return bundle;
}

void write_embeddings_csv(const std::string& path, const Dataset& data, const Matrix& embeddings) {
  if (embeddings.rows() != data.size()) throw ContractViolation("write_embeddings_csv: one embedding row per sample");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << "age,group";
  for (std::size_t j = 0; j < embeddings.cols(); ++j) out << ",e" << j;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_double(data[i].chron_age) << ',' << data[i].group;
    for (double v : embeddings.row(i)) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace brainage
