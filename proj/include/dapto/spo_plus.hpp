#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dapto/datagen.hpp"
#include "dapto/optcore.hpp"
#include "dapto/predictors.hpp"

namespace dapto {

/// SPO+ surrogate under the minimization convention:
///
///   l(c_hat, c) = -z*(2 c_hat - c) + 2 c_hat' x*(c) - z*(c)
///
/// where z*(v) = min_x v'x. Convex in c_hat and never below the decision regret.
double spo_plus_loss(const DecisionProblem& problem, const CostRef& predicted, const CostRef& realized);

/// Subgradient of spo_plus_loss in c_hat: 2 (x*(c) - x*(2 c_hat - c)).
/// Stepping c_hat <- c_hat - eta * g does not increase the loss for small eta.
CostVector spo_plus_subgradient(const DecisionProblem& problem, const CostRef& predicted, const CostRef& realized);

struct SpoPlusConfig {
  enum class Init { kZero, kPilot };

  double learning_rate = 0.1;  // eta_t = learning_rate / sqrt(t + 1), t counts minibatch steps
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double time_limit_seconds = 300.0;  // checked between epochs only
  std::uint64_t seed = 0;
  Init init = Init::kPilot;

  void validate() const;
};

struct SpoPlusEpoch {
  std::size_t epoch = 0;  // 0 is the initial point
  double train_spo_loss = 0.0;
  double val_spo_loss = 0.0;
  double val_regret = 0.0;
  double elapsed_seconds = 0.0;
};

struct SpoPlusLog {
  std::vector<SpoPlusEpoch> epochs;
  std::size_t epochs_completed = 0;
  std::size_t best_epoch = 0;
  bool time_limit_hit = false;
};

struct SpoPlusFit {
  LinearPredictor predictor;
  SpoPlusLog log;
};

/// Minibatch subgradient descent on the coefficients of an affine predictor.
/// Returns the coefficients with the lowest validation SPO+ loss seen at an
/// epoch boundary. Without a validation set the training set is monitored.
SpoPlusFit train_spo_plus(const DecisionProblem& problem, const Dataset& train, const SpoPlusConfig& config,
                          const Dataset* validation = nullptr);

}  // namespace dapto
