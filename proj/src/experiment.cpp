#include "dapto/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <regex>
#include <tuple>

#include "dapto/error.hpp"
#include "dapto/parallel.hpp"
#include "dapto/random.hpp"

namespace dapto {

std::unique_ptr<DecisionProblem> make_problem(const std::string& name) {
  if (name == "two-edge") return std::make_unique<TwoEdgeProblem>();
  static const std::regex grid_pattern(R"(grid-(\d+)x(\d+))");
  std::smatch m;
  if (std::regex_match(name, m, grid_pattern)) {
    return std::make_unique<GridNetwork>(std::stoul(m[1].str()), std::stoul(m[2].str()));
  }
  throw ConfigError("unknown problem '" + name + "' (expected grid-RxC or two-edge)");
}

bool is_known_method(const std::string& name) {
  for (const char* known : {methods::kPtoLinear, methods::kPtoForest, methods::kDecisionAwareLinear,
                            methods::kDecisionAwareLinearEdge, methods::kDecisionAwareForest,
                            methods::kDecisionAwareLinearCv, methods::kDecisionAwareLinearEdgeCv,
                            methods::kSpoPlus}) {
    if (name == known) return true;
  }
  return false;
}

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(schema_version));
  }
  const auto problem_instance = make_problem(problem);
  if (problem == "two-edge") throw ConfigError("the sweep runs on grid problems only");
  if (features == 0) throw ConfigError("features must be positive");
  if (!(noise_halfwidth >= 0.0 && noise_halfwidth < 1.0)) throw ConfigError("noise_halfwidth must lie in [0, 1)");
  if (degrees.empty() || n_train.empty() || methods.empty()) throw ConfigError("degrees, n_train and methods must be non-empty");
  for (int deg : degrees) {
    if (deg < 1) throw ConfigError("degrees must be >= 1");
  }
  for (std::size_t n : n_train) {
    if (n < 2) throw ConfigError("n_train values must be >= 2");
  }
  if (n_test == 0 || replications == 0) throw ConfigError("n_test and replications must be positive");
  for (const auto& m : methods) {
    if (!is_known_method(m)) throw ConfigError("unknown method '" + m + "'");
  }
  for (double v : nu) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("nu values must lie in [0, 1]");
  }
  for (double v : nu_candidates) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("nu_candidates must lie in [0, 1]");
  }
  if (nu_candidates.empty()) throw ConfigError("nu_candidates must be non-empty");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in (0, 1)");
  }
  if (regret_reference != "true-mean" && regret_reference != "realized") {
    throw ConfigError("regret_reference must be 'true-mean' or 'realized'");
  }
  forest.validate();
  spo_plus.validate();
}

// ---------------------------------------------------------------------------

RegretEvaluator::RegretEvaluator(const DecisionProblem& problem, Matrix contexts, Matrix reference_costs)
    : problem_(&problem), contexts_(std::move(contexts)), reference_(std::move(reference_costs)) {
  if (contexts_.rows() == 0 || contexts_.rows() != reference_.rows()) {
    throw InputError("evaluation set must be non-empty with matching rows");
  }
  optimal_.reserve(static_cast<std::size_t>(reference_.rows()));
  for (Eigen::Index i = 0; i < reference_.rows(); ++i) {
    optimal_.push_back(problem.solve(reference_.row(i).transpose()));
    optimal_total_ += reference_.row(i).dot(optimal_.back());
  }
  if (optimal_total_ == 0.0) throw ConfigError("total optimal cost of the evaluation set is zero");
}

RegretEvaluator::Result RegretEvaluator::evaluate_predictions(const Matrix& predictions) const {
  if (predictions.rows() != reference_.rows() || predictions.cols() != reference_.cols()) {
    throw InputError("prediction matrix shape differs from the evaluation set");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < reference_.rows(); ++i) {
    const DecisionVector x = problem_->solve(predictions.row(i).transpose());
    total += std::max(0.0, reference_.row(i).dot(x - optimal_[static_cast<std::size_t>(i)]));
  }
  Result r;
  r.mean_regret = total / static_cast<double>(reference_.rows());
  r.normalized_regret = total / optimal_total_;
  return r;
}

RegretEvaluator::Result RegretEvaluator::evaluate(const Predictor& predictor) const {
  return evaluate_predictions(predictor.predict_all(contexts_));
}

double normalized_regret(const DecisionProblem& problem, const Matrix& contexts, const Matrix& reference_costs,
                         const Predictor& predictor) {
  return RegretEvaluator(problem, contexts, reference_costs).evaluate(predictor).normalized_regret;
}

double pick_nu(const std::vector<double>& candidates, const std::vector<double>& scores) {
  if (candidates.empty() || candidates.size() != scores.size()) {
    throw InputError("pick_nu needs one score per candidate");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (scores[i] < scores[best] || (scores[i] == scores[best] && candidates[i] < candidates[best])) best = i;
  }
  return candidates[best];
}

NuSelection select_nu(const DecisionProblem& problem, const Dataset& fit_part, const Dataset& validation_part,
                      const DecisionAwareConfig& base, const std::vector<double>& candidates) {
  if (candidates.empty()) throw InputError("select_nu needs at least one candidate");
  NuSelection out;
  out.candidates = candidates;
  if (candidates.size() == 1) {
    out.nu = candidates.front();
    out.validation_regret.assign(1, std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  const RegretEvaluator evaluator(problem, validation_part.contexts, validation_part.costs);
  const Predictor pilot = fit_predictor(fit_part, SampleWeights::uniform(fit_part.size()), base);
  for (double nu : candidates) {
    DecisionAwareConfig cfg = base;
    cfg.nu = nu;
    const DecisionAwareFit fit = fit_decision_aware(problem, fit_part, cfg, &pilot);
    out.validation_regret.push_back(evaluator.evaluate(fit.predictor).normalized_regret);
  }
  out.nu = pick_nu(candidates, out.validation_regret);
  return out;
}

void sort_records(std::vector<ExperimentRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const ExperimentRecord& a, const ExperimentRecord& b) {
    return std::tie(a.replication, a.degree, a.n_train, a.method, a.nu, a.k) <
           std::tie(b.replication, b.degree, b.n_train, b.method, b.nu, b.k);
  });
}

std::string dataset_hash(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&](const Matrix& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    const std::size_t count = static_cast<std::size_t>(m.size()) * sizeof(double);
    for (std::size_t i = 0; i < count; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  feed(data.contexts);
  feed(data.costs);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Block {
  std::size_t replication;
  int degree;
  std::size_t n_train;
};

bool is_forest_method(const std::string& m) {
  return m == methods::kPtoForest || m == methods::kDecisionAwareForest;
}

class BlockRunner {
 public:
  BlockRunner(const ExperimentConfig& config, const DecisionProblem& problem, const Block& block)
      : config_(config), problem_(problem), block_(block) {}

  std::vector<ExperimentRecord> run() {
    const std::uint64_t rep_seed = derive_seed(config_.root_seed, block_.replication);
    const DgpParams params = DgpParams::with_random_base(problem_.dimension(), config_.features, block_.degree,
                                                         config_.noise_halfwidth, derive_seed(rep_seed, 0));
    const Dataset test = generate_grid_dataset(params, config_.n_test, derive_seed(rep_seed, 1));
    train_seed_ = derive_seed(rep_seed, 2 + block_.n_train);
    train_ = generate_grid_dataset(params, block_.n_train, train_seed_);
    test_hash_ = dataset_hash(test);
    test_costs_ = test.costs;
    const Matrix reference =
        config_.regret_reference == "true-mean" ? true_conditional_means(params, test.contexts) : test.costs;
    evaluator_ = std::make_unique<RegretEvaluator>(problem_, test.contexts, reference);

    for (const auto& method : config_.methods) {
      try {
        run_method(method);
      } catch (const std::exception& e) {
        ExperimentRecord r = base_record(method, 0.0, 0);
        r.status = std::string("error: ") + e.what();
        r.mean_regret = r.normalized_regret = r.test_mse = std::numeric_limits<double>::quiet_NaN();
        records_.push_back(std::move(r));
      }
    }
    fill_improvements();
    return std::move(records_);
  }

 private:
  ExperimentRecord base_record(const std::string& method, double nu, std::size_t k) const {
    ExperimentRecord r;
    r.replication = block_.replication;
    r.method = method;
    r.nu = nu;
    r.k = k;
    r.degree = block_.degree;
    r.n_train = block_.n_train;
    r.regret_reference = config_.regret_reference;
    r.test_hash = test_hash_;
    return r;
  }

  void emit(const std::string& method, double nu, std::size_t k, const Predictor& predictor, double seconds) {
    ExperimentRecord r = base_record(method, nu, k);
    const Matrix predictions = predictor.predict_all(evaluator_->contexts());
    const auto result = evaluator_->evaluate_predictions(predictions);
    r.mean_regret = result.mean_regret;
    r.normalized_regret = result.normalized_regret;
    r.test_mse = (predictions - test_costs_).array().square().mean();
    r.train_seconds = seconds;
    records_.push_back(std::move(r));
  }

  DecisionAwareConfig base_config(PredictorKind kind, WeightMode mode) const {
    DecisionAwareConfig cfg;
    cfg.predictor = kind;
    cfg.weight_mode = mode;
    cfg.normalize = config_.normalize_weights;
    cfg.forest = config_.forest;
    cfg.forest.seed = derive_seed(train_seed_, 11);
    cfg.forest.workers = 1;
    return cfg;
  }

  const Predictor& pilot(PredictorKind kind, double& seconds) {
    auto& slot = kind == PredictorKind::kLinear ? linear_pilot_ : forest_pilot_;
    auto& slot_seconds = kind == PredictorKind::kLinear ? linear_pilot_seconds_ : forest_pilot_seconds_;
    if (!slot) {
      const auto start = Clock::now();
      slot = std::make_unique<Predictor>(
          fit_predictor(train_, SampleWeights::uniform(train_.size()), base_config(kind, WeightMode::kRegret)));
      slot_seconds = seconds_since(start);
    }
    seconds = slot_seconds;
    return *slot;
  }

  void run_reweighted(const std::string& method, PredictorKind kind, WeightMode mode) {
    double pilot_seconds = 0.0;
    const Predictor& start_point = pilot(kind, pilot_seconds);
    const std::size_t max_k = config_.k.empty() ? 0 : *std::max_element(config_.k.begin(), config_.k.end());
    for (double nu : config_.nu) {
      DecisionAwareConfig cfg = base_config(kind, mode);
      cfg.nu = nu;
      cfg.rounds = max_k;
      const auto start = Clock::now();
      const DecisionAwareFit fit = fit_decision_aware(problem_, train_, cfg, &start_point);
      const double seconds = pilot_seconds + seconds_since(start);
      for (std::size_t k : config_.k) emit(method, nu, k, fit.trace.rounds[k].predictor, seconds);
    }
  }

  void run_cross_validated(const std::string& method, WeightMode mode) {
    const auto start = Clock::now();
    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(train_seed_, 13));
    std::shuffle(order.begin(), order.end(), rng);
    auto n_val = static_cast<std::size_t>(std::round(config_.validation_fraction * static_cast<double>(order.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, order.size() - 1);
    const Dataset validation = train_.subset({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val)});
    const Dataset fit_part = train_.subset({order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end()});

    DecisionAwareConfig cfg = base_config(PredictorKind::kLinear, mode);
    cfg.rounds = config_.k.empty() ? 1 : config_.k.front();
    const NuSelection chosen = select_nu(problem_, fit_part, validation, cfg, config_.nu_candidates);
    cfg.nu = chosen.nu;
    const DecisionAwareFit fit = fit_decision_aware(problem_, train_, cfg);
    emit(method, chosen.nu, cfg.rounds, fit.predictor, seconds_since(start));
  }

  void run_method(const std::string& method) {
    double seconds = 0.0;
    if (method == methods::kPtoLinear) {
      const Predictor& p = pilot(PredictorKind::kLinear, seconds);
      emit(method, 0.0, 0, p, seconds);
    } else if (method == methods::kPtoForest) {
      const Predictor& p = pilot(PredictorKind::kForest, seconds);
      emit(method, 0.0, 0, p, seconds);
    } else if (method == methods::kDecisionAwareLinear) {
      run_reweighted(method, PredictorKind::kLinear, WeightMode::kRegret);
    } else if (method == methods::kDecisionAwareLinearEdge) {
      run_reweighted(method, PredictorKind::kLinear, WeightMode::kDecisionDiff);
    } else if (method == methods::kDecisionAwareForest) {
      run_reweighted(method, PredictorKind::kForest, WeightMode::kRegret);
    } else if (method == methods::kDecisionAwareLinearCv) {
      run_cross_validated(method, WeightMode::kRegret);
    } else if (method == methods::kDecisionAwareLinearEdgeCv) {
      run_cross_validated(method, WeightMode::kDecisionDiff);
    } else if (method == methods::kSpoPlus) {
      SpoPlusConfig cfg = config_.spo_plus;
      cfg.seed = derive_seed(train_seed_, 12);
      const auto start = Clock::now();
      const SpoPlusFit fit = train_spo_plus(problem_, train_, cfg);
      emit(method, 0.0, 0, Predictor(fit.predictor), seconds_since(start));
    } else {
      throw ConfigError("unknown method '" + method + "'");
    }
  }

  void fill_improvements() {
    std::map<std::string, double> baseline;
    for (const auto& r : records_) {
      if (r.status == "ok" && (r.method == methods::kPtoLinear || r.method == methods::kPtoForest)) {
        baseline[r.method] = r.normalized_regret;
      }
    }
    for (auto& r : records_) {
      const std::string family = is_forest_method(r.method) ? methods::kPtoForest : methods::kPtoLinear;
      const auto it = baseline.find(family);
      if (it == baseline.end() || r.status != "ok") {
        r.improvement_abs = r.improvement_rel = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      r.improvement_abs = it->second - r.normalized_regret;
      r.improvement_rel = it->second > 0.0 ? r.improvement_abs / it->second : 0.0;
    }
  }

  const ExperimentConfig& config_;
  const DecisionProblem& problem_;
  Block block_;
  std::uint64_t train_seed_ = 0;
  Dataset train_;
  Matrix test_costs_;
  std::string test_hash_;
  std::unique_ptr<RegretEvaluator> evaluator_;
  std::unique_ptr<Predictor> linear_pilot_;
  std::unique_ptr<Predictor> forest_pilot_;
  double linear_pilot_seconds_ = 0.0;
  double forest_pilot_seconds_ = 0.0;
  std::vector<ExperimentRecord> records_;
};

}  // namespace

std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config,
                                             const std::function<void(const ExperimentRecord&)>& on_record) {
  config.validate();
  const auto problem = make_problem(config.problem);

  std::vector<Block> blocks;
  for (std::size_t rep = 0; rep < config.replications; ++rep) {
    for (int degree : config.degrees) {
      for (std::size_t n : config.n_train) blocks.push_back({rep, degree, n});
    }
  }

  std::vector<std::vector<ExperimentRecord>> results(blocks.size());
  std::mutex appender;
  parallel_for(blocks.size(), config.workers, [&](std::size_t b) {
    std::vector<ExperimentRecord> out;
    try {
      out = BlockRunner(config, *problem, blocks[b]).run();
    } catch (const std::exception& e) {
      for (const auto& m : config.methods) {
        ExperimentRecord r;
        r.replication = blocks[b].replication;
        r.degree = blocks[b].degree;
        r.n_train = blocks[b].n_train;
        r.method = m;
        r.regret_reference = config.regret_reference;
        r.mean_regret = r.normalized_regret = r.test_mse = std::numeric_limits<double>::quiet_NaN();
        r.improvement_abs = r.improvement_rel = std::numeric_limits<double>::quiet_NaN();
        r.status = std::string("error: ") + e.what();
        out.push_back(std::move(r));
      }
    }
    if (on_record) {
      std::lock_guard lock(appender);
      for (const auto& r : out) on_record(r);
    }
    results[b] = std::move(out);
  });

  std::vector<ExperimentRecord> records;
  for (auto& block : results) {
    for (auto& r : block) records.push_back(std::move(r));
  }
  sort_records(records);
  return records;
}

std::optional<double> linear_decision_boundary(const LinearPredictor& predictor) {
  const Eigen::MatrixXd& coef = predictor.coefficients();
  if (coef.rows() != 2 || coef.cols() != 2) throw InputError("decision boundary needs a 2-output, 1-feature model");
  const double slope = coef(0, 1) - coef(1, 1);
  if (slope == 0.0) return std::nullopt;
  return -(coef(0, 0) - coef(1, 0)) / slope;
}

ToyWalkthrough run_two_edge_walkthrough(std::size_t n, std::uint64_t seed, double nu, std::size_t rounds,
                                        const TwoEdgeParams& params) {
  ToyWalkthrough out;
  out.data = generate_two_edge_dataset(n, seed, params);
  const TwoEdgeProblem problem;
  DecisionAwareConfig cfg;
  cfg.nu = nu;
  cfg.rounds = rounds;
  out.fit = fit_decision_aware(problem, out.data, cfg);
  for (const auto& round : out.fit.trace.rounds) {
    out.boundaries.push_back(linear_decision_boundary(*round.predictor.linear()));
  }
  out.crossing = out.data.meta.crossing.value_or(kTwoEdgeCrossing);
  return out;
}

}  // namespace dapto
