#include "dapto/decision_aware.hpp"

#include <cmath>
#include <string>

#include "dapto/error.hpp"

namespace dapto {

namespace {

void check_compatible(const DecisionProblem& problem, const Dataset& data, const Predictor& predictor) {
  data.validate();
  if (data.dimension() != problem.dimension()) {
    throw InputError("dataset has " + std::to_string(data.dimension()) + " cost columns but " + problem.name() +
                     " has dimension " + std::to_string(problem.dimension()));
  }
  if (predictor.dimension() != problem.dimension() || predictor.features() != data.features()) {
    throw InputError("predictor shape does not match the problem and dataset");
  }
}

}  // namespace

RegretWeights compute_regret_weights(const DecisionProblem& problem, const Dataset& data, const Predictor& predictor) {
  check_compatible(problem, data, predictor);
  const Matrix predicted = predictor.predict_all(data.contexts);
  RegretWeights out;
  out.source = predictor.kind();
  out.alpha.resize(data.costs.rows());
  for (Eigen::Index i = 0; i < data.costs.rows(); ++i) {
    out.alpha[i] = decision_regret(problem, data.costs.row(i).transpose(), predicted.row(i).transpose());
  }
  return out;
}

Eigen::MatrixXd compute_decision_difference(const DecisionProblem& problem, const Dataset& data,
                                            const Predictor& predictor) {
  check_compatible(problem, data, predictor);
  const Matrix predicted = predictor.predict_all(data.contexts);
  Eigen::MatrixXd out(data.costs.rows(), data.costs.cols());
  for (Eigen::Index i = 0; i < data.costs.rows(); ++i) {
    const DecisionVector diff =
        problem.solve(predicted.row(i).transpose()) - problem.solve(data.costs.row(i).transpose());
    out.row(i) = diff.cwiseAbs().transpose();
  }
  return out;
}

namespace {

void check_nu(double nu) {
  if (!(nu >= 0.0 && nu <= 1.0)) throw InputError("mixing weight nu must lie in [0, 1], got " + std::to_string(nu));
}

}  // namespace

SampleWeights mix_weights(const RegretWeights& regret, double nu, bool normalize) {
  check_nu(nu);
  const Eigen::VectorXd& alpha = regret.alpha;
  if (!alpha.allFinite() || (alpha.array() < 0.0).any()) throw InputError("regret weights must be finite and >= 0");
  const auto n = static_cast<std::size_t>(alpha.size());
  if (nu == 0.0 || (alpha.array() == 0.0).all()) return SampleWeights::uniform(n);
  const Eigen::VectorXd scaled = normalize ? Eigen::VectorXd(alpha / alpha.mean()) : alpha;
  return SampleWeights(Eigen::VectorXd((nu * scaled.array() + (1.0 - nu)).matrix()));
}

SampleWeights mix_decision_difference(const Eigen::MatrixXd& difference, double nu, bool normalize) {
  check_nu(nu);
  if (!difference.allFinite() || (difference.array() < 0.0).any()) {
    throw InputError("decision differences must be finite and >= 0");
  }
  const auto n = static_cast<std::size_t>(difference.rows());
  if (nu == 0.0 || (difference.array() == 0.0).all()) return SampleWeights::uniform(n);
  const Eigen::MatrixXd scaled = normalize ? Eigen::MatrixXd(difference / difference.mean()) : difference;
  Eigen::MatrixXd w = (nu * scaled.array() + (1.0 - nu)).matrix();
  // nu = 1 can zero out a whole coordinate when no sample ever got that edge wrong.
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    if (!(w.col(j).array() > 0.0).any()) w.col(j).setOnes();
  }
  return SampleWeights::per_output(std::move(w));
}

void DecisionAwareConfig::validate() const {
  check_nu(nu);
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw InputError("ridge must be finite and >= 0");
  if (predictor == PredictorKind::kForest) forest.validate();
}

Predictor fit_predictor(const Dataset& data, const SampleWeights& weights, const DecisionAwareConfig& config) {
  if (config.predictor == PredictorKind::kLinear) {
    return fit_weighted_least_squares(data.contexts, data.costs, weights, config.ridge).predictor;
  }
  return fit_forest(data.contexts, data.costs, weights, config.forest);
}

DecisionAwareFit fit_decision_aware(const DecisionProblem& problem, const Dataset& data,
                                    const DecisionAwareConfig& config, const Predictor* pilot) {
  config.validate();
  data.validate();
  if (data.dimension() != problem.dimension()) throw InputError("dataset does not match the problem dimension");

  DecisionAwareFit fit;
  SampleWeights weights = SampleWeights::uniform(data.size());
  double frac_zero = 1.0;
  Predictor current;

  for (std::size_t k = 0; k <= config.rounds; ++k) {
    try {
      current = (k == 0 && pilot != nullptr) ? *pilot : fit_predictor(data, weights, config);
    } catch (const std::exception& e) {
      throw ConfigError("decision-aware fit failed in round " + std::to_string(k) + ": " + e.what());
    }

    const RegretWeights regret = compute_regret_weights(problem, data, current);
    RoundRecord record;
    record.round = k;
    record.mean_weight = weights.values().mean();
    record.frac_zero = frac_zero;
    record.weighted_mse = mse(current, data.contexts, data.costs, weights);
    record.mean_regret = regret.alpha.mean();
    record.weights = weights;
    record.predictor = current;
    fit.trace.rounds.push_back(std::move(record));

    if (k == config.rounds) break;
    frac_zero = (regret.alpha.array() == 0.0).cast<double>().mean();
    if (config.weight_mode == WeightMode::kRegret) {
      weights = mix_weights(regret, config.nu, config.normalize);
    } else {
      weights = mix_decision_difference(compute_decision_difference(problem, data, current), config.nu,
                                        config.normalize);
    }
  }
  fit.predictor = current;
  return fit;
}

DecisionVector predict_then_optimize(const DecisionProblem& problem, const Predictor& predictor,
                                     const Eigen::Ref<const Eigen::VectorXd>& z) {
  return problem.solve(predictor.predict(z));
}

double oracle_reweighted_loss(const DecisionProblem& problem, const Dataset& data, const Predictor& predictor) {
  const RegretWeights regret = compute_regret_weights(problem, data, predictor);
  const Matrix predicted = predictor.predict_all(data.contexts);
  const Eigen::ArrayXd sq = (predicted - data.costs).array().square().rowwise().mean();
  return (regret.alpha.array() * sq).mean();
}

}  // namespace dapto
