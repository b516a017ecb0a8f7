#include "dapto/predictor.hpp"

#include <type_traits>

#include "dapto/error.hpp"

namespace dapto {

std::string Predictor::kind() const {
  switch (model_.index()) {
    case 0: return "linear";
    case 1: return "forest";
    default: return "true-mean";
  }
}

std::size_t Predictor::features() const {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TrueMeanPredictor>) {
          return m.params.features;
        } else {
          return m.features();
        }
      },
      model_);
}

std::size_t Predictor::dimension() const {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TrueMeanPredictor>) {
          return m.params.dimension();
        } else {
          return m.dimension();
        }
      },
      model_);
}

CostVector Predictor::predict(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  return std::visit(
      [&](const auto& m) -> CostVector {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TrueMeanPredictor>) {
          return true_conditional_mean(m.params, z);
        } else {
          return m.predict(z);
        }
      },
      model_);
}

Matrix Predictor::predict_all(const Matrix& contexts) const {
  return std::visit(
      [&](const auto& m) -> Matrix {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TrueMeanPredictor>) {
          if (static_cast<std::size_t>(contexts.cols()) != m.params.features) {
            throw InputError("contexts have the wrong number of columns");
          }
          return true_conditional_means(m.params, contexts);
        } else {
          return m.predict_all(contexts);
        }
      },
      model_);
}

double mse(const Predictor& predictor, const Matrix& contexts, const Matrix& costs, const SampleWeights& weights) {
  if (contexts.rows() != costs.rows()) throw InputError("contexts and costs differ in row count");
  if (predictor.dimension() != static_cast<std::size_t>(costs.cols())) {
    throw InputError("predictor dimension does not match the cost columns");
  }
  return weighted_mse(predictor.predict_all(contexts), costs, weights);
}

}  // namespace dapto
