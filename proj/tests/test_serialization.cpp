#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"

#include "dapto/error.hpp"
#include "dapto/serialization.hpp"

using namespace dapto;

TEST_CASE("doubles round-trip exactly") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(1.0) == "1");
}

TEST_CASE("config round trip") {
  ExperimentConfig cfg;
  cfg.degrees = {1, 2, 4, 8};
  cfg.forest.weighting = ForestWeighting::kSplit;
  cfg.spo_plus.init = SpoPlusConfig::Init::kZero;
  cfg.root_seed = 12345678901234ULL;
  const ExperimentConfig back = config_from_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
  CHECK(back.degrees == cfg.degrees);
  CHECK(back.forest.weighting == ForestWeighting::kSplit);
  CHECK(back.root_seed == cfg.root_seed);
}

TEST_CASE("config keys are strict") {
  nlohmann::json j = config_to_json(ExperimentConfig{});
  j["replicates"] = 3;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = config_to_json(ExperimentConfig{});
  j["forest"]["leaves"] = 3;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = config_to_json(ExperimentConfig{});
  j.erase("schema_version");
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = config_to_json(ExperimentConfig{});
  j["schema_version"] = 7;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = config_to_json(ExperimentConfig{});
  j["n_test"] = "many";
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  // Missing keys keep their defaults.
  const ExperimentConfig partial = config_from_json({{"schema_version", 1}, {"replications", 3}});
  CHECK(partial.replications == 3);
  CHECK(partial.n_test == ExperimentConfig{}.n_test);
}

TEST_CASE("predictor round trips") {
  const auto params = DgpParams::with_random_base(40, 5, 4, 0.25, 1);
  const Dataset data = generate_grid_dataset(params, 80, 2);
  const Predictor linear = fit_weighted_least_squares(data.contexts, data.costs, SampleWeights::uniform(80)).predictor;
  ForestConfig fc;
  fc.trees = 3;
  const Predictor forest = fit_forest(data.contexts, data.costs, SampleWeights::uniform(80), fc);
  const Predictor truth = TrueMeanPredictor{params};
  for (const Predictor* p : {&linear, &forest, &truth}) {
    const Predictor back = predictor_from_json(nlohmann::json::parse(predictor_to_json(*p).dump()));
    CHECK(back.kind() == p->kind());
    CHECK(back.predict_all(data.contexts) == p->predict_all(data.contexts));
  }
  CHECK_THROWS_AS(predictor_from_json({{"kind", "neural"}, {"features", 1}, {"dimension", 1}}), InputError);
  CHECK_THROWS_AS(predictor_from_json({{"kind", "linear"}}), InputError);
}

TEST_CASE("dataset csv round trip") {
  const auto params = DgpParams::with_random_base(40, 5, 2, 0.25, 3);
  Dataset data = generate_grid_dataset(params, 20, 4);
  data.meta.problem = "grid-5x5";
  std::stringstream buffer;
  write_dataset_csv(buffer, data);
  const Dataset back = read_dataset_csv(buffer);
  CHECK(back.contexts == data.contexts);
  CHECK(back.costs == data.costs);
  CHECK(back.meta.problem == "grid-5x5");
  CHECK(back.meta.degree == 2);
  CHECK(back.meta.seed == 4);
  CHECK(back.meta.base == params.base);

  const Dataset toy = generate_two_edge_dataset(5, 1);
  std::stringstream toy_buffer;
  write_dataset_csv(toy_buffer, toy);
  const Dataset toy_back = read_dataset_csv(toy_buffer);
  CHECK(toy_back.meta.crossing.value() == kTwoEdgeCrossing);
  CHECK(toy_back.costs == toy.costs);
}

TEST_CASE("dataset csv without metadata and malformed input") {
  std::stringstream plain("z_0,c_0,c_1\n0.5,1,2\n0.25,3,4\n");
  const Dataset d = read_dataset_csv(plain);
  CHECK(d.size() == 2);
  CHECK(d.features() == 1);
  CHECK(d.costs(1, 1) == 4.0);
  std::stringstream ragged("z_0,c_0\n1,2,3\n");
  CHECK_THROWS_AS(read_dataset_csv(ragged), InputError);
  std::stringstream bad_header("x,c_0\n1,2\n");
  CHECK_THROWS_AS(read_dataset_csv(bad_header), InputError);
  std::stringstream bad_number("z_0,c_0\n1,abc\n");
  CHECK_THROWS_AS(read_dataset_csv(bad_number), InputError);
}

TEST_CASE("records csv round trip") {
  ExperimentRecord r;
  r.replication = 3;
  r.method = "decision-aware-linear";
  r.nu = 0.4;
  r.k = 3;
  r.degree = 8;
  r.n_train = 1600;
  r.mean_regret = 12.5;
  r.normalized_regret = 0.123;
  r.test_mse = 1e6;
  r.train_seconds = 0.01;
  r.improvement_abs = 0.02;
  r.improvement_rel = 0.1;
  r.test_hash = "00ff00ff00ff00ff";
  ExperimentRecord failed = r;
  failed.status = "error: needs \"more\", data";
  failed.normalized_regret = std::numeric_limits<double>::quiet_NaN();

  std::stringstream buffer;
  write_records_csv(buffer, {r, failed});
  std::string header;
  std::getline(buffer, header);
  CHECK(header ==
        "replication,method,nu,k,degree,n_train,mean_regret,normalized_regret,test_mse,train_seconds,"
        "improvement_abs,improvement_rel,regret_reference,test_hash,status");
  buffer.seekg(0);
  const auto back = read_records_csv(buffer);
  REQUIRE(back.size() == 2);
  CHECK(back[0].method == r.method);
  CHECK(back[0].nu == r.nu);
  CHECK(back[0].normalized_regret == r.normalized_regret);
  CHECK(back[1].status == failed.status);
  CHECK(std::isnan(back[1].normalized_regret));
}

TEST_CASE("trace and training log csv") {
  FitTrace trace;
  trace.rounds.resize(2);
  trace.rounds[1].round = 1;
  trace.rounds[1].mean_weight = 1.0;
  std::ostringstream out;
  write_trace_csv(out, trace);
  const std::string text = out.str();
  CHECK(text.rfind("round,mean_weight,frac_zero,weighted_mse,mean_regret\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);

  SpoPlusLog log;
  log.epochs.push_back({0, 1.5, 1.4, 0.2, 0.01});
  std::ostringstream spo;
  write_spo_log_csv(spo, log);
  CHECK(spo.str() == "epoch,train_spo_loss,val_regret,elapsed_seconds\n0,1.5,0.2,0.01\n");
}
