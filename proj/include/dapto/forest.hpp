#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dapto/datagen.hpp"
#include "dapto/predictors.hpp"

namespace dapto {

/// How sample weights enter forest training.
enum class ForestWeighting {
  kResample,  // bootstrap draws proportional to weight; unit weight per draw
  kSplit,     // uniform bootstrap; weights scale the split criterion and leaf means
};

struct ForestConfig {
  std::size_t trees = 100;
  std::size_t max_depth = 12;
  std::size_t min_leaf = 5;
  std::size_t features_per_split = 0;  // 0 means ceil(p / 3)
  bool bootstrap = true;
  ForestWeighting weighting = ForestWeighting::kResample;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
};

/// Multi-output regression tree stored as flat node arrays.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf = -1;              // row into the leaf value table
    std::size_t samples = 0;    // in-bag observations (with multiplicity) that reached this node
  };

  RegressionTree() = default;
  RegressionTree(std::vector<Node> nodes, Eigen::MatrixXd leaf_values);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Eigen::MatrixXd& leaf_values() const { return leaf_values_; }

  /// Leaf row reached by z; z goes left when z[feature] <= threshold.
  Eigen::Index leaf_index(const Eigen::Ref<const Eigen::VectorXd>& z) const;

 private:
  std::vector<Node> nodes_;
  Eigen::MatrixXd leaf_values_;  // leaves x d
};

class ForestPredictor {
 public:
  ForestPredictor() = default;
  ForestPredictor(std::vector<RegressionTree> trees, std::size_t features, std::size_t dimension);

  const std::vector<RegressionTree>& trees() const { return trees_; }
  std::size_t features() const { return features_; }
  std::size_t dimension() const { return dimension_; }

  /// Average of the leaf values reached in every tree.
  CostVector predict(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  Matrix predict_all(const Matrix& contexts) const;

 private:
  std::vector<RegressionTree> trees_;
  std::size_t features_ = 0;
  std::size_t dimension_ = 0;
};

/// Fits a weighted random forest. Per-output weights are reduced to their row
/// means because every tree shares one partition across cost coordinates.
/// Tree t draws from derive_seed(config.seed, t), so the result does not
/// depend on the worker count.
ForestPredictor fit_forest(const Matrix& contexts, const Matrix& costs, const SampleWeights& weights,
                           const ForestConfig& config);

}  // namespace dapto
