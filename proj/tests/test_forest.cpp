#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"

#include "dapto/error.hpp"
#include "dapto/forest.hpp"
#include "dapto/predictors.hpp"

using namespace dapto;

namespace {

ForestConfig single_tree(std::size_t depth, std::size_t min_leaf) {
  ForestConfig cfg;
  cfg.trees = 1;
  cfg.max_depth = depth;
  cfg.min_leaf = min_leaf;
  cfg.bootstrap = false;
  cfg.features_per_split = 100;
  return cfg;
}

// Best single split by brute force: weighted SSE over every feature and gap.
struct Split {
  int feature = -1;
  double lo = 0.0, hi = 0.0;  // the gap containing the best threshold
  double sse = std::numeric_limits<double>::infinity();
};

Split exhaustive_split(const Matrix& z, const Matrix& c, const Eigen::VectorXd& w, std::size_t min_leaf) {
  Split best;
  const Eigen::Index n = z.rows();
  for (Eigen::Index f = 0; f < z.cols(); ++f) {
    std::vector<double> values(z.col(f).data(), z.col(f).data() + 0);
    for (Eigen::Index i = 0; i < n; ++i) values.push_back(z(i, f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      const double t = 0.5 * (values[k] + values[k + 1]);
      double sse = 0.0;
      std::size_t left_count = 0, right_count = 0;
      for (int side = 0; side < 2; ++side) {
        double wsum = 0.0;
        Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(c.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
          if ((z(i, f) <= t) == (side == 0)) {
            wsum += w(i);
            s += w(i) * c.row(i);
            (side == 0 ? left_count : right_count)++;
          }
        }
        const Eigen::RowVectorXd mean = s / wsum;
        for (Eigen::Index i = 0; i < n; ++i) {
          if ((z(i, f) <= t) == (side == 0)) sse += w(i) * (c.row(i) - mean).squaredNorm();
        }
      }
      if (left_count < min_leaf || right_count < min_leaf) continue;
      if (sse < best.sse - 1e-12) best = {static_cast<int>(f), values[k], values[k + 1], sse};
    }
  }
  return best;
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

TEST_CASE("a single distinct context predicts the weighted mean") {
  Matrix z = Matrix::Constant(6, 2, 1.5);
  Matrix c(6, 2);
  c << 1, 0, 2, 0, 3, 0, 4, 1, 5, 1, 6, 1;
  const Eigen::VectorXd w = (Eigen::VectorXd(6) << 1, 1, 1, 1, 1, 5).finished();
  for (auto weighting : {ForestWeighting::kResample, ForestWeighting::kSplit}) {
    ForestConfig cfg = single_tree(5, 1);
    cfg.weighting = weighting;
    const ForestPredictor forest = fit_forest(z, c, SampleWeights(w), cfg);
    const Eigen::RowVector2d expected = (w.transpose() * c) / w.sum();
    CHECK(forest.predict(Eigen::Vector2d(1.5, 1.5)).transpose().isApprox(expected, 1e-12));
    CHECK(forest.trees().front().nodes().size() == 1);
  }
}

TEST_CASE("step function splits inside the gap") {
  Matrix z(8, 1), c(8, 1);
  z << 0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9;
  c << 0, 0, 0, 0, 1, 1, 1, 1;
  const ForestPredictor forest = fit_forest(z, c, SampleWeights::uniform(8), single_tree(1, 1));
  const auto& root = forest.trees().front().nodes().front();
  CHECK(root.feature == 0);
  CHECK(root.threshold > 0.4);
  CHECK(root.threshold < 0.6);
  CHECK(forest.predict(Eigen::VectorXd::Constant(1, 0.05))(0) == 0.0);
  CHECK(forest.predict(Eigen::VectorXd::Constant(1, 0.95))(0) == 1.0);
}

TEST_CASE("root split agrees with exhaustive search") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix z = random_matrix(rng, 40, 3);
    Matrix c = random_matrix(rng, 40, 2);
    c.col(0) += 3.0 * z.col(trial % 3).cwiseSign();
    Eigen::VectorXd w(40);
    for (Eigen::Index i = 0; i < 40; ++i) w(i) = u(rng);
    const std::size_t min_leaf = 1 + trial % 4;
    const Split oracle = exhaustive_split(z, c, w / w.mean(), min_leaf);
    const ForestPredictor forest = fit_forest(z, c, SampleWeights(w), single_tree(1, min_leaf));
    const auto& root = forest.trees().front().nodes().front();
    CHECK(root.feature == oracle.feature);
    CHECK(root.threshold > oracle.lo);
    CHECK(root.threshold < oracle.hi);
  }
}

TEST_CASE("a deep unbootstrapped tree reproduces its training targets") {
  Matrix z(4, 1), c(4, 2);
  z << 0.0, 1.0, 2.0, 3.0;
  c << 5, 1, -2, 0, 7, 7, 1, 3;
  const ForestPredictor forest = fit_forest(z, c, SampleWeights::uniform(4), single_tree(10, 1));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(forest.predict(z.row(i).transpose()).transpose() == c.row(i));
  CHECK(forest.trees().front().leaf_values().rows() == 4);
}

TEST_CASE("forest is deterministic and independent of worker count") {
  std::mt19937_64 rng(12);
  const Matrix z = random_matrix(rng, 100, 5);
  const Matrix c = random_matrix(rng, 100, 4);
  ForestConfig cfg;
  cfg.trees = 10;
  cfg.seed = 42;
  const ForestPredictor a = fit_forest(z, c, SampleWeights::uniform(100), cfg);
  const ForestPredictor b = fit_forest(z, c, SampleWeights::uniform(100), cfg);
  cfg.workers = 3;
  const ForestPredictor par = fit_forest(z, c, SampleWeights::uniform(100), cfg);
  const Matrix probe = random_matrix(rng, 20, 5);
  CHECK(a.predict_all(probe) == b.predict_all(probe));
  CHECK(a.predict_all(probe) == par.predict_all(probe));
  cfg.seed = 43;
  CHECK(fit_forest(z, c, SampleWeights::uniform(100), cfg).predict_all(probe) != a.predict_all(probe));
}

TEST_CASE("forest averages its trees") {
  std::mt19937_64 rng(13);
  const Matrix z = random_matrix(rng, 60, 2);
  const Matrix c = random_matrix(rng, 60, 3);
  ForestConfig cfg;
  cfg.trees = 5;
  const ForestPredictor forest = fit_forest(z, c, SampleWeights::uniform(60), cfg);
  const Eigen::Vector2d probe(0.3, -0.4);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
  for (const auto& tree : forest.trees()) sum += tree.leaf_values().row(tree.leaf_index(probe)).transpose();
  CHECK(forest.predict(probe).isApprox(sum / 5.0, 1e-14));
}

TEST_CASE("zero-weight samples never enter resampled trees") {
  Matrix z(40, 1), c(40, 1);
  for (Eigen::Index i = 0; i < 40; ++i) {
    z(i, 0) = static_cast<double>(i);
    c(i, 0) = i < 20 ? 1.0 : 100.0;
  }
  Eigen::VectorXd w = Eigen::VectorXd::Ones(40);
  w.tail(20).setZero();
  ForestConfig cfg;
  cfg.trees = 20;
  cfg.min_leaf = 1;
  const ForestPredictor forest = fit_forest(z, c, SampleWeights(w), cfg);
  CHECK(forest.predict_all(z).maxCoeff() == 1.0);
}

TEST_CASE("forest config validation") {
  const Matrix z = Matrix::Zero(10, 1);
  const Matrix c = Matrix::Zero(10, 1);
  ForestConfig cfg;
  cfg.trees = 0;
  CHECK_THROWS_AS(fit_forest(z, c, SampleWeights::uniform(10), cfg), InputError);
  cfg = ForestConfig{};
  cfg.max_depth = 0;
  CHECK_THROWS_AS(fit_forest(z, c, SampleWeights::uniform(10), cfg), InputError);
  cfg = ForestConfig{};
  cfg.min_leaf = 11;
  CHECK_THROWS_AS(fit_forest(z, c, SampleWeights::uniform(10), cfg), InputError);
  CHECK_THROWS_AS(fit_forest(z, c, SampleWeights::uniform(9), ForestConfig{}), InputError);
}
