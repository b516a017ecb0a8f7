#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dapto/optcore.hpp"

namespace dapto {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DatasetMeta {
  std::string problem;
  int degree = 1;
  double noise_halfwidth = 0.0;
  std::uint64_t seed = 0;
  // Grid DGP: the d x p Bernoulli base matrix. Empty for other problems.
  Eigen::MatrixXd base;
  // Two-edge toy: the feature value where the mean costs cross.
  std::optional<double> crossing;
};

/// Paired contexts (n x p) and realized costs (n x d); row i of each belongs to sample i.
struct Dataset {
  Matrix contexts;
  Matrix costs;
  DatasetMeta meta;

  std::size_t size() const { return static_cast<std::size_t>(contexts.rows()); }
  std::size_t features() const { return static_cast<std::size_t>(contexts.cols()); }
  std::size_t dimension() const { return static_cast<std::size_t>(costs.cols()); }

  Dataset subset(const std::vector<std::size_t>& rows) const;
  void validate() const;
};

/// Polynomial data-generating process for the grid benchmark:
///
///   c_j = (1 + (1 + b_j'z / sqrt(p)))^degree * eps_j,  eps_j ~ U[1 - w, 1 + w]
///
/// with z ~ N(0, I_p) and b_j the j-th row of `base`. Degree 1 is the
/// well-specified control for affine predictors; larger degrees increase the
/// misspecification. For odd degrees a cost can be negative when
/// b_j'z / sqrt(p) < -2.
struct DgpParams {
  std::size_t features = 5;
  int degree = 1;
  double noise_halfwidth = 0.25;
  Eigen::MatrixXd base;  // d x features, entries in {0, 1}

  std::size_t dimension() const { return static_cast<std::size_t>(base.rows()); }
  void validate() const;

  /// Draws `base` i.i.d. Bernoulli(1/2) from `seed`.
  static DgpParams with_random_base(std::size_t dimension, std::size_t features, int degree,
                                    double noise_halfwidth, std::uint64_t seed);
};

Dataset generate_grid_dataset(const DgpParams& params, std::size_t n, std::uint64_t seed);

/// E[c | z]; the noise has unit mean.
CostVector true_conditional_mean(const DgpParams& params, const Eigen::Ref<const Eigen::VectorXd>& z);

/// Row-wise E[c | z] for every context row.
Matrix true_conditional_means(const DgpParams& params, const Matrix& contexts);

/// Two-edge illustrative example with one feature z ~ U[0, 1]:
///   edge 1: 0.5 + 3 z^4                     (flat, then steep)
///   edge 2: 0.6 + k sqrt(z)                 (k chosen so the curves cross at z = 0.7)
/// plus independent N(0, noise_sd^2) noise on each edge. Edge 1 is cheaper in
/// mean to the left of the crossing and dearer to the right.
struct TwoEdgeParams {
  double noise_sd = 0.1;
};

inline constexpr double kTwoEdgeCrossing = 0.7;

CostVector two_edge_mean(double z);
Dataset generate_two_edge_dataset(std::size_t n, std::uint64_t seed, const TwoEdgeParams& params = {});

}  // namespace dapto
