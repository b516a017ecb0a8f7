#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dapto/datagen.hpp"
#include "dapto/decision_aware.hpp"
#include "dapto/error.hpp"
#include "dapto/experiment.hpp"
#include "dapto/random.hpp"
#include "dapto/serialization.hpp"
#include "dapto/spo_plus.hpp"

namespace {

using namespace dapto;

struct Options {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  std::string method = methods::kDecisionAwareLinear;
  double nu = 0.5;
  std::size_t k = 1;
  int degree = 1;
  std::size_t n_train = 1000;
  std::string problem = "grid-5x5";
  std::size_t features = 5;
  double noise = 0.25;
  std::string data_path;
  std::string predictor_path;
  std::string truth_out;
  std::string trace_out;
  std::string reference = "auto";
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> base_seed;
  bool seed_given = false;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  return out;
}

// Writes to --out when given, stdout otherwise.
template <class Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
  } else {
    auto out = open_output(path);
    write(out);
  }
}

ExperimentConfig base_config(const Options& o) {
  ExperimentConfig config = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (o.seed_given) config.root_seed = o.seed;
  if (o.workers) config.workers = *o.workers;
  return config;
}

int run_gen(const Options& o) {
  Dataset data;
  if (o.problem == "two-edge") {
    data = generate_two_edge_dataset(o.n_train, o.seed, TwoEdgeParams{o.noise});
  } else {
    const auto problem = make_problem(o.problem);
    const DgpParams params =
        DgpParams::with_random_base(problem->dimension(), o.features, o.degree, o.noise,
                                    derive_seed(o.base_seed.value_or(o.seed), 0));
    data = generate_grid_dataset(params, o.n_train, derive_seed(o.seed, 1));
    data.meta.problem = problem->name();
    if (!o.truth_out.empty()) save_predictor(Predictor(TrueMeanPredictor{params}), o.truth_out);
  }
  emit(o.out, [&](std::ostream& out) { write_dataset_csv(out, data); });
  return 0;
}

std::string problem_of(const Dataset& data, const Options& o) {
  return data.meta.problem.empty() ? o.problem : data.meta.problem;
}

int run_train(const Options& o) {
  if (o.data_path.empty()) throw InputError("train needs --data");
  if (!is_known_method(o.method)) throw ConfigError("unknown method '" + o.method + "'");
  const ExperimentConfig config = base_config(o);
  const Dataset data = load_dataset(o.data_path);
  const auto problem = make_problem(problem_of(data, o));

  DecisionAwareConfig da;
  da.nu = o.nu;
  da.rounds = o.k;
  da.normalize = config.normalize_weights;
  da.forest = config.forest;
  da.forest.seed = derive_seed(o.seed, 11);
  const std::string& m = o.method;
  if (m == methods::kPtoForest || m == methods::kDecisionAwareForest) da.predictor = PredictorKind::kForest;
  if (m == methods::kDecisionAwareLinearEdge || m == methods::kDecisionAwareLinearEdgeCv) {
    da.weight_mode = WeightMode::kDecisionDiff;
  }
  if (m == methods::kPtoLinear || m == methods::kPtoForest) {
    da.nu = 0.0;
    da.rounds = 0;
  }

  std::optional<Predictor> fitted;
  if (m == methods::kSpoPlus) {
    SpoPlusConfig spo = config.spo_plus;
    spo.seed = derive_seed(o.seed, 12);
    const SpoPlusFit fit = train_spo_plus(*problem, data, spo);
    fitted = Predictor(fit.predictor);
    if (!o.trace_out.empty()) {
      auto out = open_output(o.trace_out);
      write_spo_log_csv(out, fit.log);
    }
  } else {
    if (m == methods::kDecisionAwareLinearCv || m == methods::kDecisionAwareLinearEdgeCv) {
      std::vector<std::size_t> order(data.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng(derive_seed(o.seed, 13));
      std::shuffle(order.begin(), order.end(), rng);
      const auto n_val = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::round(config.validation_fraction * static_cast<double>(order.size()))), 1,
          order.size() - 1);
      const Dataset validation = data.subset({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val)});
      const Dataset fit_part = data.subset({order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end()});
      da.nu = select_nu(*problem, fit_part, validation, da, config.nu_candidates).nu;
      std::cerr << "selected nu = " << format_double(da.nu) << '\n';
    }
    const DecisionAwareFit fit = fit_decision_aware(*problem, data, da);
    fitted = fit.predictor;
    if (!o.trace_out.empty()) {
      auto out = open_output(o.trace_out);
      write_trace_csv(out, fit.trace);
    }
  }
  emit(o.out, [&](std::ostream& out) { out << predictor_to_json(*fitted).dump() << '\n'; });
  return 0;
}

int run_eval(const Options& o) {
  if (o.data_path.empty() || o.predictor_path.empty()) throw InputError("eval needs --data and --predictor");
  const Dataset data = load_dataset(o.data_path);
  const Predictor predictor = load_predictor(o.predictor_path);
  const auto problem = make_problem(problem_of(data, o));
  if (predictor.features() != data.features() || predictor.dimension() != data.dimension()) {
    throw InputError("predictor shape does not match the dataset");
  }

  std::string reference = o.reference;
  const bool has_truth = data.meta.base.size() > 0;
  if (reference == "auto") reference = has_truth ? "true-mean" : "realized";
  Matrix reference_costs;
  if (reference == "true-mean") {
    if (!has_truth) throw InputError("dataset carries no generating parameters; use --reference realized");
    DgpParams params;
    params.features = data.features();
    params.degree = data.meta.degree;
    params.noise_halfwidth = data.meta.noise_halfwidth;
    params.base = data.meta.base;
    reference_costs = true_conditional_means(params, data.contexts);
  } else if (reference == "realized") {
    reference_costs = data.costs;
  } else {
    throw ConfigError("--reference must be auto, true-mean or realized");
  }

  const RegretEvaluator evaluator(*problem, data.contexts, reference_costs);
  const Matrix predictions = predictor.predict_all(data.contexts);
  const auto result = evaluator.evaluate_predictions(predictions);
  const nlohmann::json report = {{"predictor", predictor.kind()},
                                 {"samples", data.size()},
                                 {"regret_reference", reference},
                                 {"mean_regret", result.mean_regret},
                                 {"normalized_regret", result.normalized_regret},
                                 {"test_mse", (predictions - data.costs).array().square().mean()}};
  emit(o.out, [&](std::ostream& out) { out << report.dump(2) << '\n'; });
  return 0;
}

int run_sweep(const Options& o) {
  if (o.config_path.empty()) throw InputError("sweep needs --config");
  const ExperimentConfig config = base_config(o);
  std::ofstream file;
  std::ostream* stream = &std::cout;
  if (!o.out.empty() && o.out != "-") {
    file = open_output(o.out);
    stream = &file;
  }
  const auto records = run_experiment(config, [](const ExperimentRecord& r) {
    std::cerr << "rep " << r.replication << " deg " << r.degree << " n " << r.n_train << ' ' << r.method << " nu "
              << format_double(r.nu) << " k " << r.k << ": " << format_double(r.normalized_regret) << '\n';
  });
  write_records_csv(*stream, records);
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.status != "ok";
  if (failed > 0) std::cerr << failed << " record(s) failed\n";
  return 0;
}

int run_toy(const Options& o) {
  const std::filesystem::path dir = o.out.empty() ? std::filesystem::path(".") : std::filesystem::path(o.out);
  std::filesystem::create_directories(dir);
  const ToyWalkthrough toy = run_two_edge_walkthrough(o.n_train, o.seed, o.nu, o.k, TwoEdgeParams{o.noise});

  auto points = open_output((dir / "toy_points.csv").string());
  points << "round,sample,z,c_0,c_1,weight\n";
  for (const auto& round : toy.fit.trace.rounds) {
    const Eigen::MatrixXd w = round.weights.values();
    for (std::size_t i = 0; i < toy.data.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      points << round.round << ',' << i << ',' << format_double(toy.data.contexts(row, 0)) << ','
             << format_double(toy.data.costs(row, 0)) << ',' << format_double(toy.data.costs(row, 1)) << ','
             << format_double(w(w.rows() == 1 ? 0 : row, 0)) << '\n';
    }
  }

  auto rounds = open_output((dir / "toy_rounds.csv").string());
  rounds << "round,nu,intercept_0,slope_0,intercept_1,slope_1,boundary,crossing,mean_weight,frac_zero,weighted_mse,"
            "mean_regret\n";
  for (std::size_t r = 0; r < toy.fit.trace.rounds.size(); ++r) {
    const auto& rec = toy.fit.trace.rounds[r];
    const Eigen::MatrixXd& coef = rec.predictor.linear()->coefficients();
    const auto boundary = toy.boundaries[r];
    rounds << rec.round << ',' << format_double(o.nu) << ',' << format_double(coef(0, 0)) << ','
           << format_double(coef(0, 1)) << ',' << format_double(coef(1, 0)) << ',' << format_double(coef(1, 1)) << ','
           << (boundary ? format_double(*boundary) : "nan") << ',' << format_double(toy.crossing) << ','
           << format_double(rec.mean_weight) << ',' << format_double(rec.frac_zero) << ','
           << format_double(rec.weighted_mse) << ',' << format_double(rec.mean_regret) << '\n';
  }
  std::cerr << "wrote " << (dir / "toy_points.csv").string() << " and " << (dir / "toy_rounds.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-aware predict-then-optimize on contextual shortest paths"};
  app.require_subcommand(1);
  Options o;

  const auto seed_flag = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& s) {
          o.seed = s;
          o.seed_given = true;
        },
        "Random seed");
  };

  auto* gen = app.add_subcommand("gen", "Generate a dataset CSV");
  gen->add_option("--problem", o.problem, "grid-RxC or two-edge")->capture_default_str();
  gen->add_option("--n-train,-n", o.n_train, "Number of samples")->capture_default_str();
  gen->add_option("--degree", o.degree, "Polynomial degree of the cost model")->capture_default_str();
  gen->add_option("--features", o.features, "Context dimension")->capture_default_str();
  gen->add_option("--noise", o.noise, "Noise half-width (grid) or standard deviation (two-edge)")
      ->capture_default_str();
  gen->add_option("--out", o.out, "Output CSV (stdout if omitted)");
  gen->add_option("--base-seed", o.base_seed, "Seed of the cost structure (defaults to --seed)");
  gen->add_option("--truth-out", o.truth_out, "Also write the true conditional mean as a predictor JSON");
  seed_flag(gen);

  auto* train = app.add_subcommand("train", "Fit one method and write the predictor JSON");
  train->add_option("--data", o.data_path, "Training dataset CSV")->required();
  train->add_option("--method", o.method, "Method name")->capture_default_str();
  train->add_option("--nu", o.nu, "Mixture weight")->capture_default_str();
  train->add_option("--k", o.k, "Reweighting rounds")->capture_default_str();
  train->add_option("--config", o.config_path, "Config JSON for forest and SPO+ settings");
  train->add_option("--problem", o.problem, "Problem when the dataset does not name one")->capture_default_str();
  train->add_option("--out", o.out, "Predictor JSON (stdout if omitted)");
  train->add_option("--trace-out", o.trace_out, "Round trace or SPO+ training log CSV");
  seed_flag(train);

  auto* eval = app.add_subcommand("eval", "Regret metrics of a predictor on a dataset");
  eval->add_option("--data", o.data_path, "Dataset CSV")->required();
  eval->add_option("--predictor", o.predictor_path, "Predictor JSON")->required();
  eval->add_option("--reference", o.reference, "auto, true-mean or realized")->capture_default_str();
  eval->add_option("--problem", o.problem, "Problem when the dataset does not name one")->capture_default_str();
  eval->add_option("--out", o.out, "Report JSON (stdout if omitted)");

  auto* sweep = app.add_subcommand("sweep", "Run the experiment grid from a config file");
  sweep->add_option("--config", o.config_path, "Config JSON")->required();
  sweep->add_option("--out", o.out, "Results CSV (stdout if omitted)");
  sweep->add_option("--workers", o.workers, "Worker threads (0 = all cores)");
  seed_flag(sweep);

  auto* toy = app.add_subcommand("toy", "Two-edge walkthrough");
  double toy_nu = 0.5;
  std::size_t toy_k = 2;
  std::size_t toy_n = 200;
  double toy_noise = 0.1;
  toy->add_option("--nu", toy_nu, "Mixture weight")->capture_default_str();
  toy->add_option("--k", toy_k, "Reweighting rounds")->capture_default_str();
  toy->add_option("--n-train,-n", toy_n, "Number of samples")->capture_default_str();
  toy->add_option("--noise", toy_noise, "Noise standard deviation")->capture_default_str();
  toy->add_option("--out", o.out, "Output directory (current directory if omitted)");
  seed_flag(toy);
  toy->final_callback([&] {
    o.nu = toy_nu;
    o.k = toy_k;
    o.n_train = toy_n;
    o.noise = toy_noise;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return run_gen(o);
    if (*train) return run_train(o);
    if (*eval) return run_eval(o);
    if (*sweep) return run_sweep(o);
    if (*toy) return run_toy(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
