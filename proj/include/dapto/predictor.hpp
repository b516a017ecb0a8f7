#pragma once

#include <string>
#include <variant>

#include "dapto/datagen.hpp"
#include "dapto/forest.hpp"
#include "dapto/predictors.hpp"

namespace dapto {

/// Evaluates the generating model's E[c | z]; used as a reference predictor.
struct TrueMeanPredictor {
  DgpParams params;
};

/// Any fitted cost model. Immutable after construction and safe to share.
class Predictor {
 public:
  using Model = std::variant<LinearPredictor, ForestPredictor, TrueMeanPredictor>;

  Predictor() = default;
  Predictor(LinearPredictor model) : model_(std::move(model)) {}  // NOLINT(google-explicit-constructor)
  Predictor(ForestPredictor model) : model_(std::move(model)) {}  // NOLINT(google-explicit-constructor)
  Predictor(TrueMeanPredictor model) : model_(std::move(model)) {}  // NOLINT(google-explicit-constructor)

  const Model& model() const { return model_; }
  std::string kind() const;
  std::size_t features() const;
  std::size_t dimension() const;

  CostVector predict(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  Matrix predict_all(const Matrix& contexts) const;

  const LinearPredictor* linear() const { return std::get_if<LinearPredictor>(&model_); }

 private:
  Model model_;
};

/// Weighted MSE of `predictor` on (contexts, costs).
double mse(const Predictor& predictor, const Matrix& contexts, const Matrix& costs, const SampleWeights& weights);

}  // namespace dapto
