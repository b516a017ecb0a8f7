#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dapto/datagen.hpp"
#include "dapto/decision_aware.hpp"
#include "dapto/forest.hpp"
#include "dapto/optcore.hpp"
#include "dapto/predictor.hpp"
#include "dapto/spo_plus.hpp"

namespace dapto {

inline constexpr int kConfigSchemaVersion = 1;

/// Builds a problem from its name: "grid-RxC" or "two-edge".
std::unique_ptr<DecisionProblem> make_problem(const std::string& name);

/// Method names understood by the harness.
namespace methods {
inline constexpr const char* kPtoLinear = "pto-linear";
inline constexpr const char* kPtoForest = "pto-forest";
inline constexpr const char* kDecisionAwareLinear = "decision-aware-linear";           // scalar regret weights
inline constexpr const char* kDecisionAwareLinearEdge = "decision-aware-linear-edge";  // per-edge decision differences
inline constexpr const char* kDecisionAwareForest = "decision-aware-forest";
inline constexpr const char* kDecisionAwareLinearCv = "decision-aware-linear-cv";
inline constexpr const char* kDecisionAwareLinearEdgeCv = "decision-aware-linear-edge-cv";
inline constexpr const char* kSpoPlus = "spo-plus";
}  // namespace methods

bool is_known_method(const std::string& name);

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string problem = "grid-5x5";
  std::size_t features = 5;
  double noise_halfwidth = 0.25;
  std::vector<int> degrees{1, 8};
  std::vector<std::size_t> n_train{100, 400, 1600};
  std::size_t n_test = 2000;
  std::size_t replications = 20;
  std::vector<std::string> methods{"pto-linear", "decision-aware-linear", "decision-aware-linear-edge",
                                   "pto-forest", "decision-aware-forest", "spo-plus"};
  std::vector<double> nu{0.2, 0.4, 0.6, 0.8};
  std::vector<std::size_t> k{1, 3};
  // Candidates and held-out share for the "-cv" methods.
  std::vector<double> nu_candidates{0.0, 0.2, 0.4, 0.6, 0.8};
  double validation_fraction = 0.2;
  std::uint64_t root_seed = 0;
  std::size_t workers = 0;
  bool normalize_weights = true;
  std::string regret_reference = "true-mean";  // or "realized"
  ForestConfig forest;
  SpoPlusConfig spo_plus;

  void validate() const;
};

/// One evaluated (replication, method, nu, K, degree, n_train) cell.
struct ExperimentRecord {
  std::size_t replication = 0;
  std::string method;
  double nu = 0.0;
  std::size_t k = 0;
  int degree = 1;
  std::size_t n_train = 0;
  double mean_regret = 0.0;
  double normalized_regret = 0.0;
  double test_mse = 0.0;
  double train_seconds = 0.0;
  // Against the same replication's predict-then-optimize baseline of the
  // same predictor family (pto-forest for forests, pto-linear otherwise).
  double improvement_abs = 0.0;
  double improvement_rel = 0.0;
  std::string regret_reference = "true-mean";
  std::string test_hash;
  std::string status = "ok";
};

/// Regret of plug-in decisions against fixed reference costs, with the
/// reference-optimal decisions cached.
class RegretEvaluator {
 public:
  RegretEvaluator(const DecisionProblem& problem, Matrix contexts, Matrix reference_costs);

  struct Result {
    double mean_regret = 0.0;
    double normalized_regret = 0.0;
  };

  /// mean_i c_i'(x*(c_hat_i) - x*(c_i)) and the same total divided by sum_i c_i'x*(c_i).
  Result evaluate(const Predictor& predictor) const;
  Result evaluate_predictions(const Matrix& predictions) const;

  const Matrix& contexts() const { return contexts_; }

 private:
  const DecisionProblem* problem_;
  Matrix contexts_;
  Matrix reference_;
  std::vector<DecisionVector> optimal_;
  double optimal_total_ = 0.0;
};

/// Normalized out-of-sample regret of `predictor` measured against `reference_costs`
/// (typically E[c | z]). Throws ConfigError when the total optimal cost is zero.
double normalized_regret(const DecisionProblem& problem, const Matrix& contexts, const Matrix& reference_costs,
                         const Predictor& predictor);

/// Index of the smallest score; ties go to the smaller nu.
double pick_nu(const std::vector<double>& candidates, const std::vector<double>& scores);

struct NuSelection {
  double nu = 0.0;
  std::vector<double> candidates;
  std::vector<double> validation_regret;
};

/// Fits `base` on `fit_part` for every candidate nu and keeps the one with the
/// lowest normalized regret on `validation_part` (realized costs).
NuSelection select_nu(const DecisionProblem& problem, const Dataset& fit_part, const Dataset& validation_part,
                      const DecisionAwareConfig& base, const std::vector<double>& candidates);

/// Canonical order: (replication, degree, n_train, method, nu, k).
void sort_records(std::vector<ExperimentRecord>& records);

/// Runs the whole sweep. Blocks of (replication, degree, n_train) run on
/// `config.workers` threads; `on_record` (if set) is called under a lock as
/// records complete. Returns the records in canonical order.
std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config,
                                             const std::function<void(const ExperimentRecord&)>& on_record = {});

/// FNV-1a over the raw bytes of contexts and costs, as 16 hex digits.
std::string dataset_hash(const Dataset& data);

/// Point where the two predicted edge costs of a one-feature linear model on
/// the two-edge problem are equal; empty when the fitted lines are parallel.
std::optional<double> linear_decision_boundary(const LinearPredictor& predictor);

/// Decision-aware linear fit on a fresh two-edge sample, with each round's
/// decision boundary alongside the analytic crossing.
struct ToyWalkthrough {
  Dataset data;
  DecisionAwareFit fit;
  std::vector<std::optional<double>> boundaries;  // one per round, pilot first
  double crossing = kTwoEdgeCrossing;
};

ToyWalkthrough run_two_edge_walkthrough(std::size_t n, std::uint64_t seed, double nu, std::size_t rounds,
                                        const TwoEdgeParams& params = {});

}  // namespace dapto
