#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "dapto/datagen.hpp"
#include "dapto/optcore.hpp"

namespace dapto {

/// Nonnegative per-sample weights.
///
/// Stored as an n x 1 matrix (one weight shared by every cost coordinate of a
/// sample) or an n x d matrix (a separate weight per sample and coordinate).
class SampleWeights {
 public:
  SampleWeights() = default;
  explicit SampleWeights(Eigen::VectorXd shared);

  static SampleWeights uniform(std::size_t n);
  static SampleWeights per_output(Eigen::MatrixXd weights);

  std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }
  bool shared() const { return values_.cols() == 1; }
  const Eigen::MatrixXd& values() const { return values_; }

  /// Weights applied to cost coordinate j.
  Eigen::VectorXd column(std::size_t j) const;

  /// Per-sample weight: the shared column, or the row mean across coordinates.
  Eigen::VectorXd row_means() const;

  /// Checks finiteness, nonnegativity, shape against (n, d), and that every
  /// column carries some positive weight.
  void validate(std::size_t n, std::size_t d) const;

  /// Each column rescaled to mean 1. A constant column becomes exactly 1.
  SampleWeights normalized() const;

 private:
  Eigen::MatrixXd values_;
};

/// Affine cost model c_hat(z) = Theta [1; z]; Theta is d x (p + 1), one row per cost coordinate.
class LinearPredictor {
 public:
  LinearPredictor() = default;
  explicit LinearPredictor(Eigen::MatrixXd coefficients);

  const Eigen::MatrixXd& coefficients() const { return coef_; }
  std::size_t dimension() const { return static_cast<std::size_t>(coef_.rows()); }
  std::size_t features() const { return static_cast<std::size_t>(coef_.cols()) - 1; }

  CostVector predict(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  Matrix predict_all(const Matrix& contexts) const;

 private:
  Eigen::MatrixXd coef_;
};

struct LinearFitInfo {
  double ridge = 0.0;           // largest ridge actually added to any Gram matrix
  bool ridge_fallback = false;  // a singular Gram matrix forced the automatic ridge
};

struct LinearFit {
  LinearPredictor predictor;
  LinearFitInfo info;
};

/// Weighted least squares per cost coordinate with a shared design [1, z].
///
/// Weights are normalized to mean 1 first. Zero-weight rows are skipped. When
/// `ridge` is 0 and the weighted Gram matrix is singular, a ridge of
/// 1e-8 * trace(G) / (p + 1) is added and reported in the fit info.
LinearFit fit_weighted_least_squares(const Matrix& contexts, const Matrix& costs, const SampleWeights& weights,
                                     double ridge = 0.0);

/// Design matrix [1, z] for every row.
Eigen::MatrixXd design_matrix(const Matrix& contexts);

/// Weighted mean of squared coordinate errors: sum_ij w_ij e_ij^2 / sum_ij w_ij.
double weighted_mse(const Matrix& predictions, const Matrix& costs, const SampleWeights& weights);

/// Gradient of weighted_mse with respect to Theta for a linear predictor.
Eigen::MatrixXd mse_gradient(const LinearPredictor& predictor, const Matrix& contexts, const Matrix& costs,
                             const SampleWeights& weights);

}  // namespace dapto
