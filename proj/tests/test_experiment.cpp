#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"

#include "dapto/error.hpp"
#include "dapto/experiment.hpp"
#include "dapto/serialization.hpp"

using namespace dapto;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.replications = 2;
  cfg.degrees = {8};
  cfg.n_train = {60};
  cfg.n_test = 200;
  cfg.nu = {0.4};
  cfg.k = {1, 2};
  cfg.nu_candidates = {0.0, 0.4};
  cfg.methods = {methods::kPtoLinear,          methods::kDecisionAwareLinear, methods::kDecisionAwareLinearEdge,
                 methods::kDecisionAwareLinearCv, methods::kPtoForest,      methods::kDecisionAwareForest,
                 methods::kSpoPlus};
  cfg.forest.trees = 5;
  cfg.spo_plus.epochs = 3;
  cfg.workers = 2;
  return cfg;
}

std::string csv_without_times(std::vector<ExperimentRecord> records) {
  for (auto& r : records) r.train_seconds = 0.0;
  std::ostringstream out;
  write_records_csv(out, records);
  return out.str();
}

}  // namespace

TEST_CASE("problem names") {
  CHECK(make_problem("grid-5x5")->dimension() == 40);
  CHECK(make_problem("grid-3x4")->name() == "grid-3x4");
  CHECK(make_problem("two-edge")->dimension() == 2);
  CHECK_THROWS_AS(make_problem("grid-5"), ConfigError);
  CHECK_THROWS_AS(make_problem("lattice"), ConfigError);
}

TEST_CASE("normalized regret fixtures") {
  const TwoEdgeProblem toy;
  Matrix z(2, 1), ref(2, 2);
  z << 0, 1;
  ref << 1, 2, 4, 3;
  Eigen::MatrixXd coef(2, 2);
  coef << 3, 0, 1, 0;
  // Sample 1 loses 1 (takes edge 2 at cost 2), sample 2 is optimal; optimal total 1 + 3.
  CHECK(normalized_regret(toy, z, ref, LinearPredictor(coef)) == doctest::Approx(0.25));
  const RegretEvaluator eval(toy, z, ref);
  CHECK(eval.evaluate(LinearPredictor(coef)).mean_regret == doctest::Approx(0.5));

  const auto params = DgpParams::with_random_base(40, 5, 8, 0.25, 1);
  const Dataset test = generate_grid_dataset(params, 300, 2);
  const Matrix truth = true_conditional_means(params, test.contexts);
  const GridNetwork grid(5, 5);
  CHECK(normalized_regret(grid, test.contexts, truth, TrueMeanPredictor{params}) == 0.0);
  const RegretEvaluator grid_eval(grid, test.contexts, truth);
  CHECK(grid_eval.evaluate_predictions(3.0 * truth).normalized_regret == 0.0);

  CHECK_THROWS_AS(RegretEvaluator(toy, z, Matrix::Zero(2, 2)), ConfigError);
}

TEST_CASE("nu selection") {
  CHECK(pick_nu({0.6}, {3.0}) == 0.6);
  CHECK(pick_nu({0.8, 0.2, 0.4}, {1.0, 1.0, 1.0}) == 0.2);
  CHECK(pick_nu({0.0, 0.2, 0.4, 0.6, 0.8}, {0.30, 0.25, 0.20, 0.22, 0.27}) == 0.4);
  CHECK_THROWS_AS(pick_nu({0.1, 0.2}, {1.0}), InputError);

  const auto params = DgpParams::with_random_base(40, 5, 8, 0.25, 3);
  const Dataset fit_part = generate_grid_dataset(params, 200, 4);
  const Dataset val = generate_grid_dataset(params, 100, 5);
  const GridNetwork grid(5, 5);
  DecisionAwareConfig base;
  const NuSelection single = select_nu(grid, fit_part, val, base, {0.4});
  CHECK(single.nu == 0.4);
  const NuSelection many = select_nu(grid, fit_part, val, base, {0.0, 0.4, 0.8});
  CHECK(many.validation_regret.size() == 3);
  CHECK(many.nu == pick_nu(many.candidates, many.validation_regret));
}

TEST_CASE("config validation") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.schema_version = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ExperimentConfig{};
  cfg.methods = {"gradient-boosting"};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ExperimentConfig{};
  cfg.nu = {1.2};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ExperimentConfig{};
  cfg.regret_reference = "noisy";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ExperimentConfig{};
  cfg.problem = "two-edge";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("one cell yields one record") {
  ExperimentConfig cfg;
  cfg.replications = 1;
  cfg.degrees = {1};
  cfg.n_train = {100};
  cfg.n_test = 100;
  cfg.methods = {methods::kPtoLinear};
  const auto records = run_experiment(cfg);
  REQUIRE(records.size() == 1);
  std::ostringstream out;
  write_records_csv(out, records);
  const std::string text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(records[0].status == "ok");
  CHECK(records[0].improvement_abs == 0.0);
}

TEST_CASE("sweep records are complete, paired and deterministic") {
  const ExperimentConfig cfg = tiny_config();
  std::size_t streamed = 0;
  const auto records = run_experiment(cfg, [&](const ExperimentRecord&) { ++streamed; });
  // Per replication: pto-linear, pto-forest, spo-plus, cv (1 each) plus 3 reweighted methods x 1 nu x 2 K.
  CHECK(records.size() == 2 * (4 + 3 * 2));
  CHECK(streamed == records.size());
  std::set<std::string> hashes[2];
  for (const auto& r : records) {
    CHECK(r.status == "ok");
    CHECK(std::isfinite(r.mean_regret));
    CHECK(r.mean_regret >= 0.0);
    CHECK(r.normalized_regret >= 0.0);
    CHECK(r.regret_reference == "true-mean");
    hashes[r.replication].insert(r.test_hash);
  }
  CHECK(hashes[0].size() == 1);
  CHECK(hashes[1].size() == 1);
  CHECK(*hashes[0].begin() != *hashes[1].begin());
  CHECK(std::is_sorted(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.replication, a.degree, a.n_train, a.method, a.nu, a.k) <
           std::tie(b.replication, b.degree, b.n_train, b.method, b.nu, b.k);
  }));

  ExperimentConfig serial = cfg;
  serial.workers = 1;
  CHECK(csv_without_times(run_experiment(serial)) == csv_without_times(records));
}

TEST_CASE("improvement columns use the matching baseline") {
  const auto records = run_experiment(tiny_config());
  for (std::size_t rep = 0; rep < 2; ++rep) {
    double linear = 0.0, forest = 0.0;
    for (const auto& r : records) {
      if (r.replication != rep) continue;
      if (r.method == methods::kPtoLinear) linear = r.normalized_regret;
      if (r.method == methods::kPtoForest) forest = r.normalized_regret;
    }
    for (const auto& r : records) {
      if (r.replication != rep) continue;
      const bool is_forest = r.method.find("forest") != std::string::npos;
      const double base = is_forest ? forest : linear;
      CHECK(r.improvement_abs == doctest::Approx(base - r.normalized_regret));
      CHECK(r.improvement_rel == doctest::Approx((base - r.normalized_regret) / base));
    }
  }
}

TEST_CASE("failing cells are marked and do not stop the sweep") {
  ExperimentConfig cfg = tiny_config();
  cfg.replications = 1;
  cfg.forest.min_leaf = 100;  // more than n_train
  const auto records = run_experiment(cfg);
  std::size_t failed = 0;
  for (const auto& r : records) {
    if (r.method.find("forest") != std::string::npos) {
      CHECK(r.status.rfind("error: ", 0) == 0);
      CHECK(std::isnan(r.normalized_regret));
      ++failed;
    } else {
      CHECK(r.status == "ok");
    }
  }
  CHECK(failed == 2);
}

TEST_CASE("realized-cost reference") {
  ExperimentConfig cfg = tiny_config();
  cfg.replications = 1;
  cfg.methods = {methods::kPtoLinear};
  cfg.regret_reference = "realized";
  const auto records = run_experiment(cfg);
  REQUIRE(records.size() == 1);
  CHECK(records[0].regret_reference == "realized");
  CHECK(records[0].normalized_regret > 0.0);
}

TEST_CASE("well-specified control") {
  ExperimentConfig cfg;
  cfg.replications = 1;
  cfg.degrees = {1};
  cfg.n_train = {1000};
  cfg.methods = {methods::kPtoLinear};
  const auto records = run_experiment(cfg);
  REQUIRE(records.size() == 1);
  CHECK(records[0].normalized_regret < 1e-3);
}

TEST_CASE("dataset hash") {
  const Dataset a = generate_two_edge_dataset(10, 1);
  CHECK(dataset_hash(a).size() == 16);
  CHECK(dataset_hash(a) == dataset_hash(generate_two_edge_dataset(10, 1)));
  CHECK(dataset_hash(a) != dataset_hash(generate_two_edge_dataset(10, 2)));
}

TEST_CASE("decision boundary of a two-edge linear model") {
  Eigen::MatrixXd coef(2, 2);
  coef << 0.0, 2.0, 1.0, 0.0;  // 2z = 1 at z = 0.5
  CHECK(linear_decision_boundary(LinearPredictor(coef)).value() == doctest::Approx(0.5));
  coef << 0.0, 1.0, 1.0, 1.0;
  CHECK_FALSE(linear_decision_boundary(LinearPredictor(coef)).has_value());
  CHECK_THROWS_AS(linear_decision_boundary(LinearPredictor(Eigen::MatrixXd::Zero(3, 2))), InputError);
}

TEST_CASE("walkthrough trace length") {
  const ToyWalkthrough toy = run_two_edge_walkthrough(100, 3, 0.5, 4);
  CHECK(toy.fit.trace.rounds.size() == 5);
  CHECK(toy.boundaries.size() == 5);
  CHECK(toy.crossing == kTwoEdgeCrossing);
}
