#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "brainage/experiment.hpp"

using namespace brainage;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Serialize, LossConfigRoundTrip) {
  LossConfig c = LossConfig::defaults_for(LossKind::MseDistance);
  c.k = 2.0 / 3.0;
  c.lambda_order = 0.37;
  c.order_gradient = OrderGradient::Full;
  const LossConfig back = loss_config_from_json(Json::parse(to_json(c).dump()));
  EXPECT_EQ(back.kind, c.kind);
  EXPECT_EQ(back.k, c.k);
  EXPECT_EQ(back.lambda_order, c.lambda_order);
  EXPECT_EQ(back.order_gradient, c.order_gradient);
}

TEST(Serialize, ParamsRoundTripBitExact) {
  ModelConfig config;
  config.input_dim = 5;
  config.hidden_dims = {7, 3};
  config.class_ages = integer_class_ages(10, 14);
  MlpParams p = init_params(config, Rng(3, 0));
  p.layers[0].bias[2] = 1.0 / 3.0;
  const MlpParams back = params_from_json(Json::parse(to_json(p).dump()));
  EXPECT_EQ(back, p);
  EXPECT_EQ(to_json(p)["version"], kSchemaVersion);
}

TEST(Serialize, ParamsShapeErrorsNameTheField) {
  ModelConfig config;
  config.input_dim = 2;
  config.hidden_dims = {2};
  config.head = HeadKind::Regressor;
  Json j = to_json(init_params(config, Rng(0, 0)));
  j["layers"][1]["bias"] = Json::array({1.0, 2.0});
  EXPECT_NE(error_of([&] { params_from_json(j); }).find("model.layers[1].bias"), std::string::npos);
}

TEST(Serialize, TrainAndSynthRoundTrip) {
  TrainConfig t;
  t.batch_size = 16;
  t.oversample = OversampleMode::ByAgeBin;
  t.loss = LossConfig::defaults_for(LossKind::Ce);
  const TrainConfig tb = train_config_from_json(to_json(t));
  EXPECT_EQ(tb.batch_size, 16u);
  EXPECT_EQ(tb.oversample, t.oversample);
  EXPECT_EQ(tb.loss.kind, LossKind::Ce);
  SynthConfig s;
  s.noise_sigma = 0.25;
  s.nuisance_sigma = 0.75;
  s.distribution = AgeDistribution::LifespanMixture;
  const SynthConfig sb = synth_config_from_json(to_json(s));
  EXPECT_EQ(sb.noise_sigma, 0.25);
  EXPECT_EQ(sb.nuisance_sigma, 0.75);
  EXPECT_EQ(sb.distribution, AgeDistribution::LifespanMixture);
}

TEST(Serialize, ExperimentRoundTripAndHash) {
  ExperimentConfig c;
  c.seed = 9;
  c.hidden_dims = {8, 4};
  c.losses = {LossKind::Ce, LossKind::CeOrder};
  c.propagate();
  const ExperimentConfig back = experiment_from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.synth.seed, 9u);
  EXPECT_EQ(back.train.seed, 9u);
  EXPECT_EQ(config_hash(c.to_json()), config_hash(back.to_json()));
  EXPECT_EQ(config_hash(c.to_json()).size(), 16u);
  ExperimentConfig other = c;
  other.seed = 10;
  other.propagate();
  EXPECT_NE(config_hash(other.to_json()), config_hash(c.to_json()));
}

TEST(Serialize, UnknownAndMistypedFieldsAreRejected) {
  EXPECT_NE(error_of([] { experiment_from_json(Json::parse(R"({"sedd": 1})")); }).find("sedd"), std::string::npos);
  EXPECT_NE(error_of([] { experiment_from_json(Json::parse(R"({"train": {"loss": {"kk": 1}}})")); })
                .find("train.loss.kk"),
            std::string::npos);
  EXPECT_NE(error_of([] { experiment_from_json(Json::parse(R"({"synth": {"n": "many"}})")); }).find("synth.n"),
            std::string::npos);
  EXPECT_NE(error_of([] { experiment_from_json(Json::parse(R"({"train": {"loss": {"k": -1}}})")); }).find("train.loss"),
            std::string::npos);
  EXPECT_NE(error_of([] { experiment_from_json(Json::parse(R"({"losses": ["mse", "l1"]})")); }).find("losses"),
            std::string::npos);
  EXPECT_NE(error_of([] { experiment_from_json(Json::parse(R"({"split": [0.5, 0.5, 0.5]})")); }).find("split"),
            std::string::npos);
}

TEST(Serialize, MalformedJsonReportsLine) {
  const auto path = (std::filesystem::temp_directory_path() / "brainage_bad.json").string();
  {
    std::ofstream out(path);
    out << "{\n  \"seed\": 1,\n  \"synth\": {\n    \"n\": 10,,\n  }\n}\n";
  }
  const std::string msg = error_of([&] { read_json_file(path); });
  EXPECT_NE(msg.find(":4:"), std::string::npos) << msg;
  EXPECT_NE(error_of([] { read_json_file("/nonexistent/brainage.json"); }).find("cannot open"), std::string::npos);
}

TEST(Serialize, HistoryWallTimeIsOptional) {
  TrainHistory h;
  h.epochs.push_back({1, 2.5, 3.5, 0.125});
  h.best_epoch = 1;
  EXPECT_FALSE(to_json(h, false)["epochs"][0].contains("wall_seconds"));
  EXPECT_EQ(to_json(h, true)["epochs"][0]["wall_seconds"], 0.125);
}

TEST(Serialize, MetricsReportNullsFailedMetrics) {
  MetricsReport r;
  r.mae = 1.5;
  r.n = 4;
  r.errors["ordinality"] = "too few classes";
  const Json j = to_json(r);
  EXPECT_EQ(j["mae"], 1.5);
  EXPECT_TRUE(j["ordinality"].is_null());
  EXPECT_TRUE(j["sb_left"].is_null());
  EXPECT_EQ(j["errors"]["ordinality"], "too few classes");
}
