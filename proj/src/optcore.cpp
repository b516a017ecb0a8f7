#include "dapto/optcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "dapto/error.hpp"

namespace dapto {

void DecisionProblem::check_cost(const CostRef& c) const {
  if (static_cast<std::size_t>(c.size()) != dimension()) {
    throw InputError(name() + ": cost vector has length " + std::to_string(c.size()) + ", expected " +
                     std::to_string(dimension()));
  }
  if (!c.allFinite()) {
    throw InputError(name() + ": cost vector has a non-finite entry");
  }
}

DecisionVector DecisionProblem::solve(const CostRef& c) const {
  check_cost(c);
  return solve_unchecked(c);
}

double DecisionProblem::optimal_value(const CostRef& c) const { return c.dot(solve(c)); }

GridNetwork::GridNetwork(std::size_t rows, std::size_t cols)
    : rows_(rows),
      cols_(cols),
      right_index_(rows * cols, std::numeric_limits<std::size_t>::max()),
      down_index_(rows * cols, std::numeric_limits<std::size_t>::max()) {
  if (rows == 0 || cols == 0 || rows * cols < 2) {
    throw InputError("grid needs at least two nodes, got " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      if (c + 1 < cols_) {
        right_index_[node(r, c)] = edges_.size();
        edges_.push_back({node(r, c), node(r, c + 1), true});
      }
      if (r + 1 < rows_) {
        down_index_[node(r, c)] = edges_.size();
        edges_.push_back({node(r, c), node(r + 1, c), false});
      }
    }
  }
}

std::string GridNetwork::name() const {
  return "grid-" + std::to_string(rows_) + "x" + std::to_string(cols_);
}

std::size_t GridNetwork::right_edge(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c + 1 >= cols_) throw InputError("no right edge at that node");
  return right_index_[node(r, c)];
}

std::size_t GridNetwork::down_edge(std::size_t r, std::size_t c) const {
  if (r + 1 >= rows_ || c >= cols_) throw InputError("no down edge at that node");
  return down_index_[node(r, c)];
}

DecisionVector GridNetwork::solve_unchecked(const CostRef& cost) const {
  // Cost-to-go from every node to the sink; the right edge wins ties, so the
  // walk from the source traces the first optimal path in right-before-down order.
  const std::size_t n_nodes = rows_ * cols_;
  std::vector<double> togo(n_nodes, 0.0);
  std::vector<std::size_t> next(n_nodes, 0);

  for (std::size_t v = n_nodes; v-- > 0;) {
    const std::size_t r = v / cols_;
    const std::size_t c = v % cols_;
    if (r + 1 == rows_ && c + 1 == cols_) continue;
    bool have = false;
    double best = 0.0;
    std::size_t best_edge = 0;
    if (c + 1 < cols_) {
      const std::size_t e = right_index_[v];
      best = cost[static_cast<Eigen::Index>(e)] + togo[node(r, c + 1)];
      best_edge = e;
      have = true;
    }
    if (r + 1 < rows_) {
      const std::size_t e = down_index_[v];
      const double cand = cost[static_cast<Eigen::Index>(e)] + togo[node(r + 1, c)];
      if (!have || cand < best) {
        best = cand;
        best_edge = e;
      }
    }
    togo[v] = best;
    next[v] = best_edge;
  }

  DecisionVector x = DecisionVector::Zero(static_cast<Eigen::Index>(edges_.size()));
  for (std::size_t v = 0; v != n_nodes - 1;) {
    const std::size_t e = next[v];
    x[static_cast<Eigen::Index>(e)] = 1.0;
    v = edges_[e].to;
  }
  return x;
}

DecisionVector TwoEdgeProblem::solve_unchecked(const CostRef& c) const {
  DecisionVector x = DecisionVector::Zero(2);
  x[c[0] <= c[1] ? 0 : 1] = 1.0;
  return x;
}

EnumeratedProblem::EnumeratedProblem(std::vector<DecisionVector> vertices, std::string name)
    : vertices_(std::move(vertices)), dimension_(0), name_(std::move(name)) {
  if (vertices_.empty()) throw InputError("enumerated problem needs at least one vertex");
  dimension_ = static_cast<std::size_t>(vertices_.front().size());
  if (dimension_ == 0) throw InputError("enumerated problem has zero dimension");
  for (const auto& v : vertices_) {
    if (static_cast<std::size_t>(v.size()) != dimension_) {
      throw InputError("enumerated problem vertices differ in length");
    }
  }
}

DecisionVector EnumeratedProblem::solve_unchecked(const CostRef& c) const {
  std::size_t best = 0;
  double best_value = c.dot(vertices_[0]);
  for (std::size_t i = 1; i < vertices_.size(); ++i) {
    const double value = c.dot(vertices_[i]);
    if (value < best_value) {
      best_value = value;
      best = i;
    }
  }
  return vertices_[best];
}

std::size_t count_paths(const GridNetwork& grid) {
  // binomial(n, k) by the multiplicative formula; exact while it fits.
  const std::size_t n = grid.rows() + grid.cols() - 2;
  const std::size_t k = std::min(grid.rows(), grid.cols()) - 1;
  std::size_t result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    const std::size_t factor = n - k + i;
    if (result > std::numeric_limits<std::size_t>::max() / factor) {
      return std::numeric_limits<std::size_t>::max();
    }
    result = result * factor / i;
  }
  return result;
}

namespace {

void walk_paths(const GridNetwork& grid, std::size_t r, std::size_t c, DecisionVector& current,
                std::vector<DecisionVector>& out) {
  if (r + 1 == grid.rows() && c + 1 == grid.cols()) {
    out.push_back(current);
    return;
  }
  if (c + 1 < grid.cols()) {
    const auto e = static_cast<Eigen::Index>(grid.right_edge(r, c));
    current[e] = 1.0;
    walk_paths(grid, r, c + 1, current, out);
    current[e] = 0.0;
  }
  if (r + 1 < grid.rows()) {
    const auto e = static_cast<Eigen::Index>(grid.down_edge(r, c));
    current[e] = 1.0;
    walk_paths(grid, r + 1, c, current, out);
    current[e] = 0.0;
  }
}

}  // namespace

std::vector<DecisionVector> enumerate_solutions(const GridNetwork& grid, std::size_t bound) {
  const std::size_t count = count_paths(grid);
  if (count > bound) {
    throw CapacityError(grid.name() + " has " + std::to_string(count) + " paths, above the bound of " +
                        std::to_string(bound));
  }
  std::vector<DecisionVector> out;
  out.reserve(count);
  DecisionVector current = DecisionVector::Zero(static_cast<Eigen::Index>(grid.dimension()));
  walk_paths(grid, 0, 0, current, out);
  return out;
}

double decision_regret(const DecisionProblem& problem, const CostRef& c_true, const CostRef& c_pred) {
  const DecisionVector x_pred = problem.solve(c_pred);
  const DecisionVector x_true = problem.solve(c_true);
  // Rounding between the DP's accumulation order and the dot product can
  // leave a near-tie a few ulps below zero.
  return std::max(0.0, c_true.dot(x_pred - x_true));
}

}  // namespace dapto
