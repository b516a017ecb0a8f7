#include "dapto/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "dapto/error.hpp"
#include "dapto/parallel.hpp"
#include "dapto/random.hpp"

namespace dapto {

void ForestConfig::validate() const {
  if (trees == 0) throw InputError("forest needs at least one tree");
  if (max_depth == 0) throw InputError("forest max depth must be >= 1");
  if (min_leaf == 0) throw InputError("forest min leaf size must be >= 1");
}

RegressionTree::RegressionTree(std::vector<Node> nodes, Eigen::MatrixXd leaf_values)
    : nodes_(std::move(nodes)), leaf_values_(std::move(leaf_values)) {}

Eigen::Index RegressionTree::leaf_index(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  int at = 0;
  while (nodes_[static_cast<std::size_t>(at)].feature >= 0) {
    const Node& node = nodes_[static_cast<std::size_t>(at)];
    at = z[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes_[static_cast<std::size_t>(at)].leaf;
}

ForestPredictor::ForestPredictor(std::vector<RegressionTree> trees, std::size_t features, std::size_t dimension)
    : trees_(std::move(trees)), features_(features), dimension_(dimension) {}

CostVector ForestPredictor::predict(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (static_cast<std::size_t>(z.size()) != features_) {
    throw InputError("context has length " + std::to_string(z.size()) + ", expected " + std::to_string(features_));
  }
  CostVector sum = CostVector::Zero(static_cast<Eigen::Index>(dimension_));
  for (const auto& tree : trees_) sum += tree.leaf_values().row(tree.leaf_index(z)).transpose();
  return sum / static_cast<double>(trees_.size());
}

Matrix ForestPredictor::predict_all(const Matrix& contexts) const {
  Matrix out(contexts.rows(), static_cast<Eigen::Index>(dimension_));
  for (Eigen::Index i = 0; i < contexts.rows(); ++i) out.row(i) = predict(contexts.row(i).transpose()).transpose();
  return out;
}

namespace {

struct InBag {
  std::size_t row;
  double weight;      // effective weight in criterion and leaf mean
  std::size_t count;  // multiplicity in the bootstrap sample
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& contexts, const Matrix& costs, const ForestConfig& config, std::size_t mtry, Rng rng)
      : z_(contexts), c_(costs), config_(config), mtry_(mtry), rng_(std::move(rng)),
        d_(static_cast<Eigen::Index>(costs.cols())) {}

  RegressionTree build(std::vector<InBag> samples) {
    grow(samples, 0, samples.size(), 0);
    Eigen::MatrixXd leaves(static_cast<Eigen::Index>(leaf_rows_.size()), d_);
    for (std::size_t i = 0; i < leaf_rows_.size(); ++i) leaves.row(static_cast<Eigen::Index>(i)) = leaf_rows_[i];
    return RegressionTree(std::move(nodes_), std::move(leaves));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
  };

  int grow(std::vector<InBag>& s, std::size_t begin, std::size_t end, std::size_t depth) {
    double total_w = 0.0;
    std::size_t total_count = 0;
    Eigen::RowVectorXd total_sum = Eigen::RowVectorXd::Zero(d_);
    for (std::size_t i = begin; i < end; ++i) {
      total_w += s[i].weight;
      total_count += s[i].count;
      total_sum += s[i].weight * c_.row(static_cast<Eigen::Index>(s[i].row));
    }

    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_.back().samples = total_count;

    Split split;
    if (depth < config_.max_depth && total_count >= 2 * config_.min_leaf) {
      split = best_split(s, begin, end, total_w, total_sum);
    }
    if (split.feature < 0) {
      nodes_[static_cast<std::size_t>(id)].leaf = static_cast<int>(leaf_rows_.size());
      leaf_rows_.push_back(total_sum / total_w);
      return id;
    }

    const auto middle = std::partition(s.begin() + static_cast<std::ptrdiff_t>(begin),
                                       s.begin() + static_cast<std::ptrdiff_t>(end), [&](const InBag& b) {
                                         return z_(static_cast<Eigen::Index>(b.row), split.feature) <=
                                                split.threshold;
                                       });
    const auto mid = static_cast<std::size_t>(middle - s.begin());
    const int left = grow(s, begin, mid, depth + 1);
    const int right = grow(s, mid, end, depth + 1);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  using Node = RegressionTree::Node;

  // Maximizes ||S_L||^2 / W_L + ||S_R||^2 / W_R, i.e. the weighted reduction in
  // within-node squared error summed over cost coordinates.
  Split best_split(std::vector<InBag>& s, std::size_t begin, std::size_t end, double total_w,
                   const Eigen::RowVectorXd& total_sum) {
    const auto p = static_cast<std::size_t>(z_.cols());
    std::vector<std::size_t> candidates(p);
    std::iota(candidates.begin(), candidates.end(), 0);
    for (std::size_t i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, p - 1);
      std::swap(candidates[i], candidates[pick(rng_)]);
    }

    const double parent = total_sum.squaredNorm() / total_w;
    Split best;
    best.score = parent + 1e-12 * std::abs(parent) + 1e-300;

    std::vector<InBag> sorted(s.begin() + static_cast<std::ptrdiff_t>(begin),
                              s.begin() + static_cast<std::ptrdiff_t>(end));
    Eigen::RowVectorXd left_sum(d_);
    for (std::size_t f = 0; f < mtry_; ++f) {
      const auto feature = static_cast<Eigen::Index>(candidates[f]);
      std::sort(sorted.begin(), sorted.end(), [&](const InBag& a, const InBag& b) {
        const double za = z_(static_cast<Eigen::Index>(a.row), feature);
        const double zb = z_(static_cast<Eigen::Index>(b.row), feature);
        return za < zb || (za == zb && a.row < b.row);
      });
      left_sum.setZero();
      double left_w = 0.0;
      std::size_t left_count = 0;
      std::size_t total_count = 0;
      for (const auto& b : sorted) total_count += b.count;
      for (std::size_t t = 0; t + 1 < sorted.size(); ++t) {
        left_w += sorted[t].weight;
        left_count += sorted[t].count;
        left_sum += sorted[t].weight * c_.row(static_cast<Eigen::Index>(sorted[t].row));
        const double here = z_(static_cast<Eigen::Index>(sorted[t].row), feature);
        const double next = z_(static_cast<Eigen::Index>(sorted[t + 1].row), feature);
        if (!(here < next)) continue;
        if (left_count < config_.min_leaf || total_count - left_count < config_.min_leaf) continue;
        const double right_w = total_w - left_w;
        if (left_w <= 0.0 || right_w <= 0.0) continue;
        const double score = left_sum.squaredNorm() / left_w + (total_sum - left_sum).squaredNorm() / right_w;
        if (score > best.score) {
          best.score = score;
          best.feature = static_cast<int>(feature);
          double threshold = here + 0.5 * (next - here);
          if (!(threshold < next)) threshold = here;
          best.threshold = threshold;
        }
      }
    }
    return best;
  }

  const Matrix& z_;
  const Matrix& c_;
  const ForestConfig& config_;
  std::size_t mtry_;
  Rng rng_;
  Eigen::Index d_;
  std::vector<Node> nodes_;
  std::vector<Eigen::RowVectorXd> leaf_rows_;
};

std::vector<InBag> draw_in_bag(const Eigen::VectorXd& w, const ForestConfig& config, Rng& rng) {
  const auto n = static_cast<std::size_t>(w.size());
  std::vector<std::size_t> counts(n, 1);
  if (config.bootstrap) {
    std::fill(counts.begin(), counts.end(), 0);
    std::vector<double> probs(n, 1.0);
    if (config.weighting == ForestWeighting::kResample) {
      for (std::size_t i = 0; i < n; ++i) probs[i] = w[static_cast<Eigen::Index>(i)];
    }
    std::discrete_distribution<std::size_t> draw(probs.begin(), probs.end());
    for (std::size_t k = 0; k < n; ++k) ++counts[draw(rng)];
  }
  std::vector<InBag> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i] == 0) continue;
    const double wi = w[static_cast<Eigen::Index>(i)];
    // Without a weighted bootstrap the weights have to enter the criterion.
    const bool weight_in_split = config.weighting == ForestWeighting::kSplit || !config.bootstrap;
    const double effective = static_cast<double>(counts[i]) * (weight_in_split ? wi : 1.0);
    if (effective > 0.0) out.push_back({i, effective, counts[i]});
  }
  return out;
}

}  // namespace

ForestPredictor fit_forest(const Matrix& contexts, const Matrix& costs, const SampleWeights& weights,
                           const ForestConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(contexts.rows());
  const auto p = static_cast<std::size_t>(contexts.cols());
  const auto d = static_cast<std::size_t>(costs.cols());
  if (costs.rows() != contexts.rows()) throw InputError("contexts and costs differ in row count");
  if (p == 0) throw InputError("forest needs at least one feature");
  if (n < config.min_leaf) {
    throw InputError("forest needs at least min_leaf = " + std::to_string(config.min_leaf) + " samples, got " +
                     std::to_string(n));
  }
  if (!contexts.allFinite() || !costs.allFinite()) throw InputError("training data has non-finite entries");
  weights.validate(n, d);

  const Eigen::VectorXd w = weights.normalized().row_means();
  std::size_t mtry = config.features_per_split == 0 ? (p + 2) / 3 : config.features_per_split;
  mtry = std::clamp<std::size_t>(mtry, 1, p);

  std::vector<RegressionTree> trees(config.trees);
  parallel_for(config.trees, config.workers, [&](std::size_t t) {
    Rng rng(derive_seed(config.seed, t));
    std::vector<InBag> in_bag = draw_in_bag(w, config, rng);
    TreeBuilder builder(contexts, costs, config, mtry, std::move(rng));
    trees[t] = builder.build(std::move(in_bag));
  });
  return ForestPredictor(std::move(trees), p, d);
}

}  // namespace dapto
