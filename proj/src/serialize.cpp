#include "brainage/serialize.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace brainage {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("field '" + path + "': " + what);
}

void require_object(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!keys.contains(key)) fail(path + "." + key, "unknown field");
  }
}

double get_number(const Json& j, const char* key, const std::string& path, double fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

std::uint64_t get_unsigned(const Json& j, const char* key, const std::string& path, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    fail(path + "." + key, "expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

std::string get_string(const Json& j, const char* key, const std::string& path, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

RealVector get_reals(const Json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  RealVector out;
  for (const Json& v : j) {
    if (!v.is_number()) fail(path, "expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

template <typename Fn>
auto rethrow_as_config(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidParameter& e) {
    fail(path, e.what());
  }
}

std::string_view oversample_name(const std::optional<OversampleMode>& m) {
  if (!m) return "auto";
  return *m == OversampleMode::ByClass ? "by_class" : "by_age_bin";
}

}  // namespace

Json to_json(const LossConfig& c) {
  return Json{{"kind", std::string(to_string(c.kind))},
              {"k", c.k},
              {"lambda_order", c.lambda_order},
              {"lambda_mean", c.lambda_mean},
              {"lambda_var", c.lambda_var},
              {"order_gradient", std::string(to_string(c.order_gradient))}};
}

LossConfig loss_config_from_json(const Json& j, const std::string& path) {
  require_object(j, path, {"kind", "k", "lambda_order", "lambda_mean", "lambda_var", "order_gradient"});
  const std::string kind_name = get_string(j, "kind", path, "ce_order");
  LossConfig c = rethrow_as_config(path + ".kind", [&] { return LossConfig::defaults_for(parse_loss_kind(kind_name)); });
  c.k = get_number(j, "k", path, c.k);
  c.lambda_order = get_number(j, "lambda_order", path, c.lambda_order);
  c.lambda_mean = get_number(j, "lambda_mean", path, c.lambda_mean);
  c.lambda_var = get_number(j, "lambda_var", path, c.lambda_var);
  const std::string mode = get_string(j, "order_gradient", path, std::string(to_string(c.order_gradient)));
  c.order_gradient = rethrow_as_config(path + ".order_gradient", [&] { return parse_order_gradient(mode); });
  rethrow_as_config(path, [&] { c.validate(); return 0; });
  return c;
}

Json to_json(const ModelConfig& c) {
  Json j{{"input_dim", c.input_dim},
         {"hidden_dims", c.hidden_dims},
         {"head", c.head == HeadKind::Classifier ? "classifier" : "regressor"}};
  if (c.head == HeadKind::Classifier) j["class_ages"] = c.class_ages;
  return j;
}

ModelConfig model_config_from_json(const Json& j, const std::string& path) {
  require_object(j, path, {"input_dim", "hidden_dims", "head", "class_ages"});
  ModelConfig c;
  c.input_dim = get_unsigned(j, "input_dim", path, 0);
  if (j.contains("hidden_dims")) {
    c.hidden_dims.clear();
    for (double w : get_reals(j.at("hidden_dims"), path + ".hidden_dims")) {
      if (w < 1 || w != static_cast<double>(static_cast<std::size_t>(w))) fail(path + ".hidden_dims", "widths must be positive integers");
      c.hidden_dims.push_back(static_cast<std::size_t>(w));
    }
  }
  const std::string head = get_string(j, "head", path, "classifier");
  if (head == "classifier") {
    c.head = HeadKind::Classifier;
  } else if (head == "regressor") {
    c.head = HeadKind::Regressor;
  } else {
    fail(path + ".head", "expected 'classifier' or 'regressor'");
  }
  if (j.contains("class_ages")) c.class_ages = get_reals(j.at("class_ages"), path + ".class_ages");
  rethrow_as_config(path, [&] { c.validate(); return 0; });
  return c;
}

Json to_json(const MlpParams& p) {
  Json layers = Json::array();
  for (const Layer& l : p.layers) layers.push_back(Json{{"weights", l.weight.values()}, {"bias", l.bias}});
  return Json{{"version", kSchemaVersion}, {"config", to_json(p.config)}, {"layers", layers}};
}

MlpParams params_from_json(const Json& j, const std::string& path) {
  require_object(j, path, {"version", "config", "layers"});
  if (get_unsigned(j, "version", path, 0) != static_cast<std::uint64_t>(kSchemaVersion)) fail(path + ".version", "unsupported version");
  if (!j.contains("config")) fail(path + ".config", "missing");
  MlpParams p;
  p.config = model_config_from_json(j.at("config"), path + ".config");
  std::vector<std::size_t> dims{p.config.input_dim};
  dims.insert(dims.end(), p.config.hidden_dims.begin(), p.config.hidden_dims.end());
  dims.push_back(p.config.output_dim());
  if (!j.contains("layers") || !j.at("layers").is_array() || j.at("layers").size() != dims.size() - 1) {
    fail(path + ".layers", "expected " + std::to_string(dims.size() - 1) + " layers");
  }
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::string lp = path + ".layers[" + std::to_string(l) + "]";
    const Json& lj = j.at("layers").at(l);
    require_object(lj, lp, {"weights", "bias"});
    if (!lj.contains("weights") || !lj.contains("bias")) fail(lp, "needs weights and bias");
    RealVector w = get_reals(lj.at("weights"), lp + ".weights");
    RealVector b = get_reals(lj.at("bias"), lp + ".bias");
    if (w.size() != dims[l] * dims[l + 1]) fail(lp + ".weights", "expected " + std::to_string(dims[l] * dims[l + 1]) + " values");
    if (b.size() != dims[l + 1]) fail(lp + ".bias", "expected " + std::to_string(dims[l + 1]) + " values");
    p.layers.push_back({Matrix(dims[l], dims[l + 1], std::move(w)), std::move(b)});
  }
  return p;
}

Json to_json(const TrainConfig& c) {
  return Json{{"learning_rate", c.learning_rate},
              {"weight_decay", c.weight_decay},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"seed", c.seed},
              {"oversample", std::string(oversample_name(c.oversample))},
              {"loss", to_json(c.loss)}};
}

TrainConfig train_config_from_json(const Json& j, const std::string& path) {
  require_object(j, path, {"learning_rate", "weight_decay", "batch_size", "max_epochs", "patience", "seed", "oversample", "loss"});
  TrainConfig c;
  c.learning_rate = get_number(j, "learning_rate", path, c.learning_rate);
  c.weight_decay = get_number(j, "weight_decay", path, c.weight_decay);
  c.batch_size = get_unsigned(j, "batch_size", path, c.batch_size);
  c.max_epochs = static_cast<int>(get_unsigned(j, "max_epochs", path, static_cast<std::uint64_t>(c.max_epochs)));
  c.patience = static_cast<int>(get_unsigned(j, "patience", path, static_cast<std::uint64_t>(c.patience)));
  c.seed = get_unsigned(j, "seed", path, c.seed);
  const std::string mode = get_string(j, "oversample", path, "auto");
  if (mode == "by_class") {
    c.oversample = OversampleMode::ByClass;
  } else if (mode == "by_age_bin") {
    c.oversample = OversampleMode::ByAgeBin;
  } else if (mode != "auto") {
    fail(path + ".oversample", "expected 'auto', 'by_class' or 'by_age_bin'");
  }
  if (j.contains("loss")) c.loss = loss_config_from_json(j.at("loss"), path + ".loss");
  rethrow_as_config(path, [&] { c.validate(); return 0; });
  return c;
}

Json to_json(const SynthConfig& c) {
  return Json{{"n", c.n},
              {"d", c.d},
              {"age_lo", c.age_lo},
              {"age_hi", c.age_hi},
              {"noise_sigma", c.noise_sigma},
              {"nuisance_sigma", c.nuisance_sigma},
              {"signal_dims", c.signal_dims},
              {"non_integer_fraction", c.non_integer_fraction},
              {"distribution", c.distribution == AgeDistribution::Uniform ? "uniform" : "lifespan_mixture"},
              {"seed", c.seed},
              {"shape_seed", c.shape_seed}};
}

SynthConfig synth_config_from_json(const Json& j, const std::string& path) {
  require_object(j, path, {"n", "d", "age_lo", "age_hi", "noise_sigma", "nuisance_sigma", "signal_dims",
                           "non_integer_fraction", "distribution", "seed", "shape_seed"});
  SynthConfig c;
  c.n = get_unsigned(j, "n", path, c.n);
  c.d = get_unsigned(j, "d", path, c.d);
  c.age_lo = get_number(j, "age_lo", path, c.age_lo);
  c.age_hi = get_number(j, "age_hi", path, c.age_hi);
  c.noise_sigma = get_number(j, "noise_sigma", path, c.noise_sigma);
  c.nuisance_sigma = get_number(j, "nuisance_sigma", path, c.nuisance_sigma);
  c.signal_dims = get_unsigned(j, "signal_dims", path, c.signal_dims);
  c.non_integer_fraction = get_number(j, "non_integer_fraction", path, c.non_integer_fraction);
  const std::string dist = get_string(j, "distribution", path, "uniform");
  if (dist == "uniform") {
    c.distribution = AgeDistribution::Uniform;
  } else if (dist == "lifespan_mixture") {
    c.distribution = AgeDistribution::LifespanMixture;
  } else {
    fail(path + ".distribution", "expected 'uniform' or 'lifespan_mixture'");
  }
  c.seed = get_unsigned(j, "seed", path, c.seed);
  c.shape_seed = get_unsigned(j, "shape_seed", path, c.shape_seed);
  rethrow_as_config(path, [&] { c.validate(); return 0; });
  return c;
}

Json to_json(const SeverityConfig& c) {
  Json groups = Json::array();
  for (const auto& g : c.groups) groups.push_back(Json{{"label", g.label}, {"count", g.count}, {"gap_offset", g.gap_offset}});
  return Json{{"groups", groups}, {"base", to_json(c.base)}};
}

Json to_json(const TrainHistory& h, bool include_wall_time) {
  Json epochs = Json::array();
  for (const EpochRecord& e : h.epochs) {
    Json row{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_mae", e.val_mae}};
    if (include_wall_time) row["wall_seconds"] = e.wall_seconds;
    epochs.push_back(std::move(row));
  }
  return Json{{"version", kSchemaVersion},
              {"epochs", epochs},
              {"best_epoch", h.best_epoch},
              {"early_stopped", h.early_stopped},
              {"order_skipped_batches", h.order_skipped_batches}};
}

Json to_json(const MetricsReport& r) {
  Json j{{"n", r.n}};
  j["mae"] = r.mae ? Json(*r.mae) : Json(nullptr);
  j["ordinality"] = r.ordinality ? Json(*r.ordinality) : Json(nullptr);
  if (r.bias) {
    j["sb_left"] = r.bias->sb_left;
    j["sb_right"] = r.bias->sb_right;
    j["n_left"] = r.bias->n_left;
    j["n_right"] = r.bias->n_right;
    j["test_mean_age"] = r.bias->mean_age;
    j["test_sd_age"] = r.bias->sd_age;
  } else {
    j["sb_left"] = nullptr;
    j["sb_right"] = nullptr;
  }
  Json counts = Json::object();
  for (const auto& [age, n] : r.per_class_counts) counts[std::to_string(age)] = n;
  j["per_class_counts"] = counts;
  j["errors"] = r.errors;
  return j;
}

Json to_json(const GroupReport& r) {
  return Json{{"labels", r.labels},
              {"ranks", r.ranks},
              {"counts", r.counts},
              {"mean_gap", r.mean_gap},
              {"severity_correlation", r.severity_correlation},
              {"p_values", r.p_values}};
}

std::string config_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // Translate the byte offset into a line number for the diagnostic.
    const std::size_t offset = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n');
    throw ConfigError(path + ":" + std::to_string(line) + ": malformed JSON (" + e.what() + ")");
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

}  // namespace brainage
