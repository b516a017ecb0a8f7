#include "dapto/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "dapto/error.hpp"

namespace dapto {

SampleWeights::SampleWeights(Eigen::VectorXd shared) : values_(std::move(shared)) {}

SampleWeights SampleWeights::uniform(std::size_t n) {
  return SampleWeights(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)));
}

SampleWeights SampleWeights::per_output(Eigen::MatrixXd weights) {
  SampleWeights out;
  out.values_ = std::move(weights);
  return out;
}

Eigen::VectorXd SampleWeights::column(std::size_t j) const {
  return values_.col(shared() ? 0 : static_cast<Eigen::Index>(j));
}

Eigen::VectorXd SampleWeights::row_means() const {
  if (shared()) return values_.col(0);
  return values_.rowwise().mean();
}

void SampleWeights::validate(std::size_t n, std::size_t d) const {
  if (size() != n) {
    throw InputError("weights have " + std::to_string(size()) + " rows, expected " + std::to_string(n));
  }
  if (!shared() && static_cast<std::size_t>(values_.cols()) != d) {
    throw InputError("per-output weights have " + std::to_string(values_.cols()) + " columns, expected " +
                     std::to_string(d));
  }
  if (!values_.allFinite()) throw InputError("weights contain a non-finite entry");
  if ((values_.array() < 0.0).any()) throw InputError("weights must be nonnegative");
  for (Eigen::Index j = 0; j < values_.cols(); ++j) {
    if (!(values_.col(j).array() > 0.0).any()) throw InputError("weights are all zero");
  }
}

SampleWeights SampleWeights::normalized() const {
  Eigen::MatrixXd out = values_;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    auto col = out.col(j);
    if ((col.array() == col[0]).all()) {
      col.setOnes();
    } else {
      col /= col.mean();
    }
  }
  return SampleWeights::per_output(std::move(out));
}

LinearPredictor::LinearPredictor(Eigen::MatrixXd coefficients) : coef_(std::move(coefficients)) {
  if (coef_.cols() < 1 || coef_.rows() < 1) throw InputError("linear predictor needs a d x (p+1) matrix");
  if (!coef_.allFinite()) throw InputError("linear predictor has non-finite coefficients");
}

CostVector LinearPredictor::predict(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (static_cast<std::size_t>(z.size()) != features()) {
    throw InputError("context has length " + std::to_string(z.size()) + ", expected " +
                     std::to_string(features()));
  }
  return coef_.col(0) + coef_.rightCols(coef_.cols() - 1) * z;
}

Matrix LinearPredictor::predict_all(const Matrix& contexts) const {
  if (static_cast<std::size_t>(contexts.cols()) != features()) {
    throw InputError("contexts have " + std::to_string(contexts.cols()) + " columns, expected " +
                     std::to_string(features()));
  }
  Matrix out = contexts * coef_.rightCols(coef_.cols() - 1).transpose();
  out.rowwise() += coef_.col(0).transpose();
  return out;
}

Eigen::MatrixXd design_matrix(const Matrix& contexts) {
  Eigen::MatrixXd x(contexts.rows(), contexts.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(contexts.cols()) = contexts;
  return x;
}

namespace {

// Solves (G + ridge I) B = rhs, falling back to the automatic ridge when G is
// singular and no ridge was requested.
Eigen::MatrixXd solve_normal_equations(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& rhs, double ridge,
                                       LinearFitInfo& info) {
  const auto k = gram.rows();
  if (ridge > 0.0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram + ridge * Eigen::MatrixXd::Identity(k, k));
    info.ridge = std::max(info.ridge, ridge);
    return ldlt.solve(rhs);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-13) {
    return ldlt.solve(rhs);
  }
  const double fallback = 1e-8 * gram.trace() / static_cast<double>(k);
  info.ridge = std::max(info.ridge, fallback);
  info.ridge_fallback = true;
  ldlt.compute(gram + fallback * Eigen::MatrixXd::Identity(k, k));
  return ldlt.solve(rhs);
}

// Rows with positive weight and the design/targets restricted to them.
struct WeightedRows {
  Eigen::MatrixXd design;
  Eigen::VectorXd weights;
  std::vector<Eigen::Index> rows;
};

WeightedRows positive_rows(const Eigen::MatrixXd& design, const Eigen::VectorXd& w) {
  WeightedRows out;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) out.rows.push_back(i);
  }
  const auto m = static_cast<Eigen::Index>(out.rows.size());
  out.design.resize(m, design.cols());
  out.weights.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    out.design.row(r) = design.row(out.rows[static_cast<std::size_t>(r)]);
    out.weights[r] = w[out.rows[static_cast<std::size_t>(r)]];
  }
  return out;
}

}  // namespace

LinearFit fit_weighted_least_squares(const Matrix& contexts, const Matrix& costs, const SampleWeights& weights,
                                     double ridge) {
  const auto n = static_cast<std::size_t>(contexts.rows());
  const auto d = static_cast<std::size_t>(costs.cols());
  if (n == 0) throw InputError("cannot fit on an empty dataset");
  if (costs.rows() != contexts.rows()) throw InputError("contexts and costs differ in row count");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw InputError("ridge must be finite and >= 0");
  if (!contexts.allFinite() || !costs.allFinite()) throw InputError("training data has non-finite entries");
  weights.validate(n, d);

  const SampleWeights w = weights.normalized();
  const Eigen::MatrixXd design = design_matrix(contexts);
  const auto k = design.cols();

  LinearFit fit;
  Eigen::MatrixXd coef(static_cast<Eigen::Index>(d), k);

  const auto fit_columns = [&](const Eigen::VectorXd& column_weights, Eigen::Index first, Eigen::Index count) {
    const WeightedRows sel = positive_rows(design, column_weights);
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(sel.rows.size()), count);
    for (std::size_t r = 0; r < sel.rows.size(); ++r) {
      targets.row(static_cast<Eigen::Index>(r)) = costs.row(sel.rows[r]).segment(first, count);
    }
    const Eigen::MatrixXd weighted = sel.design.array().colwise() * sel.weights.array();
    const Eigen::MatrixXd gram = weighted.transpose() * sel.design;
    const Eigen::MatrixXd rhs = weighted.transpose() * targets;
    coef.middleRows(first, count) = solve_normal_equations(gram, rhs, ridge, fit.info).transpose();
  };

  if (w.shared()) {
    fit_columns(w.column(0), 0, static_cast<Eigen::Index>(d));
  } else {
    for (std::size_t j = 0; j < d; ++j) fit_columns(w.column(j), static_cast<Eigen::Index>(j), 1);
  }
  fit.predictor = LinearPredictor(std::move(coef));
  return fit;
}

double weighted_mse(const Matrix& predictions, const Matrix& costs, const SampleWeights& weights) {
  if (predictions.rows() != costs.rows() || predictions.cols() != costs.cols()) {
    throw InputError("predictions and costs differ in shape");
  }
  weights.validate(static_cast<std::size_t>(costs.rows()), static_cast<std::size_t>(costs.cols()));
  const Eigen::ArrayXXd sq = (predictions - costs).array().square();
  if (weights.shared()) {
    const Eigen::ArrayXd w = weights.values().col(0).array();
    return (sq.rowwise().sum() * w).sum() / (w.sum() * static_cast<double>(costs.cols()));
  }
  const Eigen::ArrayXXd w = weights.values().array();
  return (sq * w).sum() / w.sum();
}

Eigen::MatrixXd mse_gradient(const LinearPredictor& predictor, const Matrix& contexts, const Matrix& costs,
                             const SampleWeights& weights) {
  const auto d = static_cast<Eigen::Index>(costs.cols());
  weights.validate(static_cast<std::size_t>(costs.rows()), static_cast<std::size_t>(d));
  const Matrix residual = predictor.predict_all(contexts) - costs;
  Eigen::MatrixXd w(costs.rows(), d);
  for (Eigen::Index j = 0; j < d; ++j) w.col(j) = weights.column(static_cast<std::size_t>(j));
  const double total = weights.shared() ? w.col(0).sum() * static_cast<double>(d) : w.sum();
  const Eigen::MatrixXd scaled = (2.0 * residual.array() * w.array()).matrix();
  return scaled.transpose() * design_matrix(contexts) / total;
}

}  // namespace dapto
