#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dapto/datagen.hpp"
#include "dapto/forest.hpp"
#include "dapto/optcore.hpp"
#include "dapto/predictor.hpp"

namespace dapto {

enum class PredictorKind { kLinear, kForest };

/// How the previous round's decisions turn into sample weights.
enum class WeightMode {
  // alpha_i = c_i'(x*(c_hat_i) - x*(c_i)), one scalar per sample multiplying
  // its whole squared error.
  kRegret,
  // |x*(c_hat_i) - x*(c_i)| per coordinate: only the edges on which the
  // predicted and realized optimal paths disagree are up-weighted.
  kDecisionDiff,
};

/// Per-sample decision regret of a predictor on its own training data.
struct RegretWeights {
  Eigen::VectorXd alpha;
  std::string source;  // kind of the predictor that produced the regrets
};

RegretWeights compute_regret_weights(const DecisionProblem& problem, const Dataset& data, const Predictor& predictor);

/// n x d matrix |x*(c_hat(z_i)) - x*(c_i)|.
Eigen::MatrixXd compute_decision_difference(const DecisionProblem& problem, const Dataset& data,
                                            const Predictor& predictor);

/// w_i = nu * alpha_i / mean(alpha) + (1 - nu), or with raw alpha when
/// `normalize` is false. An all-zero alpha (or nu = 0) yields exactly
/// uniform weights.
SampleWeights mix_weights(const RegretWeights& regret, double nu, bool normalize = true);

/// Per-coordinate analogue of mix_weights over a decision-difference matrix;
/// normalization divides by the mean over all n x d entries.
SampleWeights mix_decision_difference(const Eigen::MatrixXd& difference, double nu, bool normalize = true);

struct DecisionAwareConfig {
  std::size_t rounds = 1;  // K reweighted refits after the pilot
  double nu = 0.5;
  PredictorKind predictor = PredictorKind::kLinear;
  WeightMode weight_mode = WeightMode::kRegret;
  bool normalize = true;
  double ridge = 0.0;
  ForestConfig forest;

  void validate() const;
};

/// One fit of the iterative loop. Round 0 is the pilot.
struct RoundRecord {
  std::size_t round = 0;
  double mean_weight = 0.0;   // mean of the mixed weights used in this round's fit
  double frac_zero = 0.0;     // share of regret weights alpha_k that are exactly zero (1 for the pilot)
  double weighted_mse = 0.0;  // training MSE under this round's weights
  double mean_regret = 0.0;   // in-sample mean regret of this round's predictor
  SampleWeights weights;
  Predictor predictor;
};

struct FitTrace {
  std::vector<RoundRecord> rounds;
};

struct DecisionAwareFit {
  Predictor predictor;
  FitTrace trace;
};

/// Pilot fit under uniform weights, then `rounds` refits, each weighted by the
/// previous round's decisions on the training data. A precomputed pilot may be
/// passed to share it across several configurations; it must be the uniform
/// fit of the same data and predictor kind.
DecisionAwareFit fit_decision_aware(const DecisionProblem& problem, const Dataset& data,
                                    const DecisionAwareConfig& config, const Predictor* pilot = nullptr);

/// Fits one predictor of the configured kind under `weights`.
Predictor fit_predictor(const Dataset& data, const SampleWeights& weights, const DecisionAwareConfig& config);

/// x*(c_hat(z)).
DecisionVector predict_then_optimize(const DecisionProblem& problem, const Predictor& predictor,
                                     const Eigen::Ref<const Eigen::VectorXd>& z);

/// Mean over samples of regret_i * mean_j (c_hat_ij - c_ij)^2, where regret_i
/// is the predictor's own decision regret. Diagnostic only.
double oracle_reweighted_loss(const DecisionProblem& problem, const Dataset& data, const Predictor& predictor);

}  // namespace dapto
