#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dapto {

using CostVector = Eigen::VectorXd;
using DecisionVector = Eigen::VectorXd;
using CostRef = Eigen::Ref<const Eigen::VectorXd>;

/// Linear minimization oracle over a polytope with vertices in {0,1}^d.
///
/// Every problem here uses the minimization convention: solve(c) returns a
/// vertex x minimizing c'x. Solutions are deterministic, including the
/// tie-breaking rule. Implementations hold no mutable state, so a single
/// instance may be shared across threads.
class DecisionProblem {
 public:
  virtual ~DecisionProblem() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;

  /// Validates `c` (length d, finite entries) and returns x*(c).
  DecisionVector solve(const CostRef& c) const;

  /// Optimal objective value c'x*(c).
  double optimal_value(const CostRef& c) const;

 protected:
  virtual DecisionVector solve_unchecked(const CostRef& c) const = 0;

  void check_cost(const CostRef& c) const;
};

/// Directed rows x cols grid with edges pointing right and down.
///
/// Nodes are numbered row-major. Edges are listed by (row, col) of their tail,
/// with the right edge before the down edge, so a 5x5 grid has 40 edges.
/// Source is the upper-left node and sink the lower-right node.
class GridNetwork final : public DecisionProblem {
 public:
  struct Edge {
    std::size_t from;
    std::size_t to;
    bool rightward;
  };

  GridNetwork(std::size_t rows, std::size_t cols);

  std::size_t dimension() const override { return edges_.size(); }
  std::string name() const override;

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t node(std::size_t r, std::size_t c) const { return r * cols_ + c; }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Edge index of the right (or down) edge leaving node (r, c).
  std::size_t right_edge(std::size_t r, std::size_t c) const;
  std::size_t down_edge(std::size_t r, std::size_t c) const;

 protected:
  // Cost-to-go pass in reverse row-major order. On equal cost-to-go the
  // right edge wins, matching the first optimal path of enumerate_solutions.
  DecisionVector solve_unchecked(const CostRef& c) const override;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> right_index_;
  std::vector<std::size_t> down_index_;
};

/// Two parallel edges; the cheaper one is chosen, ties go to edge 1.
class TwoEdgeProblem final : public DecisionProblem {
 public:
  std::size_t dimension() const override { return 2; }
  std::string name() const override { return "two-edge"; }

 protected:
  DecisionVector solve_unchecked(const CostRef& c) const override;
};

/// Oracle that scans an explicit list of feasible vertices. The first
/// vertex attaining the minimum wins.
class EnumeratedProblem final : public DecisionProblem {
 public:
  explicit EnumeratedProblem(std::vector<DecisionVector> vertices, std::string name = "enumerated");

  std::size_t dimension() const override { return dimension_; }
  std::string name() const override { return name_; }
  const std::vector<DecisionVector>& vertices() const { return vertices_; }

 protected:
  DecisionVector solve_unchecked(const CostRef& c) const override;

 private:
  std::vector<DecisionVector> vertices_;
  std::size_t dimension_;
  std::string name_;
};

inline constexpr std::size_t kDefaultEnumerationBound = 1'000'000;

/// Number of monotone source-to-sink paths, binomial(rows+cols-2, rows-1).
/// Saturates at SIZE_MAX on overflow.
std::size_t count_paths(const GridNetwork& grid);

/// All source-to-sink path indicators in depth-first order (right before down).
/// Throws CapacityError when the path count exceeds `bound`.
std::vector<DecisionVector> enumerate_solutions(const GridNetwork& grid,
                                                std::size_t bound = kDefaultEnumerationBound);

/// Decision regret c_true'(x*(c_pred) - x*(c_true)); nonnegative.
double decision_regret(const DecisionProblem& problem, const CostRef& c_true, const CostRef& c_pred);

}  // namespace dapto
