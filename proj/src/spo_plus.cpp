#include "dapto/spo_plus.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "dapto/error.hpp"
#include "dapto/random.hpp"

namespace dapto {

namespace {

void check_pair(const DecisionProblem& problem, const CostRef& predicted, const CostRef& realized) {
  const auto d = static_cast<Eigen::Index>(problem.dimension());
  if (predicted.size() != d || realized.size() != d) {
    throw InputError(problem.name() + ": SPO+ needs cost vectors of length " + std::to_string(d));
  }
}

}  // namespace

double spo_plus_loss(const DecisionProblem& problem, const CostRef& predicted, const CostRef& realized) {
  check_pair(problem, predicted, realized);
  const CostVector shifted = 2.0 * predicted - realized;
  const DecisionVector x_shifted = problem.solve(shifted);
  const DecisionVector x_true = problem.solve(realized);
  return -shifted.dot(x_shifted) + 2.0 * predicted.dot(x_true) - realized.dot(x_true);
}

CostVector spo_plus_subgradient(const DecisionProblem& problem, const CostRef& predicted, const CostRef& realized) {
  check_pair(problem, predicted, realized);
  const CostVector shifted = 2.0 * predicted - realized;
  return 2.0 * (problem.solve(realized) - problem.solve(shifted));
}

void SpoPlusConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InputError("SPO+ learning rate must be > 0");
  if (epochs == 0) throw InputError("SPO+ needs at least one epoch");
  if (batch_size == 0) throw InputError("SPO+ batch size must be >= 1");
  if (!(time_limit_seconds > 0.0)) throw InputError("SPO+ time limit must be > 0");
}

namespace {

// Realized optimal decisions cached for a fixed dataset.
struct Monitor {
  const Dataset* data;
  Eigen::MatrixXd design;
  std::vector<DecisionVector> x_true;
  Eigen::VectorXd z_true;

  Monitor(const DecisionProblem& problem, const Dataset& d) : data(&d), design(design_matrix(d.contexts)) {
    x_true.reserve(d.size());
    z_true.resize(static_cast<Eigen::Index>(d.size()));
    for (Eigen::Index i = 0; i < d.costs.rows(); ++i) {
      x_true.push_back(problem.solve(d.costs.row(i).transpose()));
      z_true[i] = d.costs.row(i).dot(x_true.back());
    }
  }

  // Mean SPO+ loss and mean regret of Theta over the whole set.
  std::pair<double, double> evaluate(const DecisionProblem& problem, const Eigen::MatrixXd& theta) const {
    double loss = 0.0;
    double regret = 0.0;
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
      const CostVector c_hat = theta * design.row(i).transpose();
      const CostVector c = data->costs.row(i).transpose();
      const CostVector shifted = 2.0 * c_hat - c;
      loss += -shifted.dot(problem.solve(shifted)) + 2.0 * c_hat.dot(x_true[static_cast<std::size_t>(i)]) -
              z_true[i];
      regret += std::max(0.0, c.dot(problem.solve(c_hat)) - z_true[i]);
    }
    const auto n = static_cast<double>(design.rows());
    return {loss / n, regret / n};
  }
};

}  // namespace

SpoPlusFit train_spo_plus(const DecisionProblem& problem, const Dataset& train, const SpoPlusConfig& config,
                          const Dataset* validation) {
  config.validate();
  train.validate();
  if (train.dimension() != problem.dimension()) throw InputError("dataset does not match the problem dimension");
  if (validation != nullptr) {
    validation->validate();
    if (validation->dimension() != train.dimension() || validation->features() != train.features()) {
      throw InputError("validation set shape differs from the training set");
    }
  }

  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  const auto d = static_cast<Eigen::Index>(train.dimension());
  const auto k = static_cast<Eigen::Index>(train.features() + 1);
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(d, k);
  if (config.init == SpoPlusConfig::Init::kPilot) {
    theta = fit_weighted_least_squares(train.contexts, train.costs, SampleWeights::uniform(train.size()))
                .predictor.coefficients();
  }

  const Monitor train_monitor(problem, train);
  const Monitor val_monitor(problem, validation != nullptr ? *validation : train);

  SpoPlusFit fit;
  {
    const auto [train_loss, train_regret] = train_monitor.evaluate(problem, theta);
    const auto [val_loss, val_regret] = val_monitor.evaluate(problem, theta);
    (void)train_regret;
    fit.log.epochs.push_back({0, train_loss, val_loss, val_regret, elapsed()});
  }
  Eigen::MatrixXd best = theta;
  double best_loss = fit.log.epochs.back().val_spo_loss;

  Rng rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  Eigen::MatrixXd grad(d, k);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      grad.setZero();
      for (std::size_t b = begin; b < end; ++b) {
        const auto i = static_cast<Eigen::Index>(order[b]);
        const auto row = train_monitor.design.row(i);
        const CostVector c_hat = theta * row.transpose();
        const CostVector c = train.costs.row(i).transpose();
        const CostVector shifted = 2.0 * c_hat - c;
        const DecisionVector x_shifted = problem.solve(shifted);
        const DecisionVector& x_true = train_monitor.x_true[order[b]];
        epoch_loss += -shifted.dot(x_shifted) + 2.0 * c_hat.dot(x_true) - train_monitor.z_true[i];
        grad.noalias() += (2.0 * (x_true - x_shifted)) * row;
      }
      const double eta = config.learning_rate / std::sqrt(static_cast<double>(step) + 1.0);
      theta -= (eta / static_cast<double>(end - begin)) * grad;
      ++step;
    }

    const auto [val_loss, val_regret] = val_monitor.evaluate(problem, theta);
    fit.log.epochs.push_back(
        {epoch, epoch_loss / static_cast<double>(order.size()), val_loss, val_regret, elapsed()});
    fit.log.epochs_completed = epoch;
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = theta;
      fit.log.best_epoch = epoch;
    }
    if (epoch < config.epochs && elapsed() >= config.time_limit_seconds) {
      fit.log.time_limit_hit = true;
      break;
    }
  }
  fit.predictor = LinearPredictor(std::move(best));
  return fit;
}

}  // namespace dapto
