#include "dapto/serialization.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "dapto/error.hpp"

namespace dapto {

using nlohmann::json;

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& text) {
  if (text == "nan" || text == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) throw InputError("not a number: '" + text + "'");
  return value;
}

template <class T>
T parse_unsigned(const std::string& text) {
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw InputError("not an integer: '" + text + "'");
  }
  return value;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else if (ch != '\r') {
      fields.back() += ch;
    }
  }
  if (quoted) throw InputError("unterminated quote in CSV line");
  return fields;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols) {
  if (!j.is_array()) throw InputError("expected an array of rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw InputError("row " + std::to_string(r) + " has the wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = j[r][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <class T>
void read_key(const json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

const char* weighting_name(ForestWeighting w) { return w == ForestWeighting::kSplit ? "split" : "resample"; }

ForestWeighting weighting_from(const std::string& s) {
  if (s == "resample") return ForestWeighting::kResample;
  if (s == "split") return ForestWeighting::kSplit;
  throw ConfigError("forest.weighting must be 'resample' or 'split'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

json config_to_json(const ExperimentConfig& c) {
  json forest = {{"trees", c.forest.trees},
                 {"max_depth", c.forest.max_depth},
                 {"min_leaf", c.forest.min_leaf},
                 {"features_per_split", c.forest.features_per_split},
                 {"bootstrap", c.forest.bootstrap},
                 {"weighting", weighting_name(c.forest.weighting)},
                 {"workers", c.forest.workers}};
  json spo = {{"learning_rate", c.spo_plus.learning_rate},
              {"epochs", c.spo_plus.epochs},
              {"batch_size", c.spo_plus.batch_size},
              {"time_limit_seconds", c.spo_plus.time_limit_seconds},
              {"init", c.spo_plus.init == SpoPlusConfig::Init::kZero ? "zero" : "pilot"}};
  return {{"schema_version", c.schema_version},
          {"problem", c.problem},
          {"features", c.features},
          {"noise_halfwidth", c.noise_halfwidth},
          {"degrees", c.degrees},
          {"n_train", c.n_train},
          {"n_test", c.n_test},
          {"replications", c.replications},
          {"methods", c.methods},
          {"nu", c.nu},
          {"k", c.k},
          {"nu_candidates", c.nu_candidates},
          {"validation_fraction", c.validation_fraction},
          {"root_seed", c.root_seed},
          {"workers", c.workers},
          {"normalize_weights", c.normalize_weights},
          {"regret_reference", c.regret_reference},
          {"forest", forest},
          {"spo_plus", spo}};
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j,
                 {"schema_version", "problem", "features", "noise_halfwidth", "degrees", "n_train", "n_test",
                  "replications", "methods", "nu", "k", "nu_candidates", "validation_fraction", "root_seed",
                  "workers", "normalize_weights", "regret_reference", "forest", "spo_plus"},
                 "config");
  if (!j.contains("schema_version")) throw ConfigError("config is missing schema_version");
  ExperimentConfig c;
  read_key(j, "schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
  }
  read_key(j, "problem", c.problem);
  read_key(j, "features", c.features);
  read_key(j, "noise_halfwidth", c.noise_halfwidth);
  read_key(j, "degrees", c.degrees);
  read_key(j, "n_train", c.n_train);
  read_key(j, "n_test", c.n_test);
  read_key(j, "replications", c.replications);
  read_key(j, "methods", c.methods);
  read_key(j, "nu", c.nu);
  read_key(j, "k", c.k);
  read_key(j, "nu_candidates", c.nu_candidates);
  read_key(j, "validation_fraction", c.validation_fraction);
  read_key(j, "root_seed", c.root_seed);
  read_key(j, "workers", c.workers);
  read_key(j, "normalize_weights", c.normalize_weights);
  read_key(j, "regret_reference", c.regret_reference);
  if (j.contains("forest")) {
    const json& f = j.at("forest");
    reject_unknown(f, {"trees", "max_depth", "min_leaf", "features_per_split", "bootstrap", "weighting", "workers"},
                   "forest");
    read_key(f, "trees", c.forest.trees);
    read_key(f, "max_depth", c.forest.max_depth);
    read_key(f, "min_leaf", c.forest.min_leaf);
    read_key(f, "features_per_split", c.forest.features_per_split);
    read_key(f, "bootstrap", c.forest.bootstrap);
    read_key(f, "workers", c.forest.workers);
    std::string weighting = weighting_name(c.forest.weighting);
    read_key(f, "weighting", weighting);
    c.forest.weighting = weighting_from(weighting);
  }
  if (j.contains("spo_plus")) {
    const json& s = j.at("spo_plus");
    reject_unknown(s, {"learning_rate", "epochs", "batch_size", "time_limit_seconds", "init"}, "spo_plus");
    read_key(s, "learning_rate", c.spo_plus.learning_rate);
    read_key(s, "epochs", c.spo_plus.epochs);
    read_key(s, "batch_size", c.spo_plus.batch_size);
    read_key(s, "time_limit_seconds", c.spo_plus.time_limit_seconds);
    std::string init = c.spo_plus.init == SpoPlusConfig::Init::kZero ? "zero" : "pilot";
    read_key(s, "init", init);
    if (init == "zero") {
      c.spo_plus.init = SpoPlusConfig::Init::kZero;
    } else if (init == "pilot") {
      c.spo_plus.init = SpoPlusConfig::Init::kPilot;
    } else {
      throw ConfigError("spo_plus.init must be 'zero' or 'pilot'");
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig& config, const std::string& path) {
  auto out = open_out(path);
  out << config_to_json(config).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Predictors

json predictor_to_json(const Predictor& predictor) {
  json j = {{"kind", predictor.kind()}, {"features", predictor.features()}, {"dimension", predictor.dimension()}};
  if (const auto* lin = std::get_if<LinearPredictor>(&predictor.model())) {
    j["coefficients"] = matrix_to_json(lin->coefficients());
  } else if (const auto* forest = std::get_if<ForestPredictor>(&predictor.model())) {
    json trees = json::array();
    for (const auto& tree : forest->trees()) {
      json t = {{"feature", json::array()}, {"threshold", json::array()}, {"left", json::array()},
                {"right", json::array()},   {"leaf", json::array()},      {"samples", json::array()}};
      for (const auto& node : tree.nodes()) {
        t["feature"].push_back(node.feature);
        t["threshold"].push_back(node.threshold);
        t["left"].push_back(node.left);
        t["right"].push_back(node.right);
        t["leaf"].push_back(node.leaf);
        t["samples"].push_back(node.samples);
      }
      t["leaf_values"] = matrix_to_json(tree.leaf_values());
      trees.push_back(std::move(t));
    }
    j["trees"] = std::move(trees);
  } else {
    const auto& truth = std::get<TrueMeanPredictor>(predictor.model());
    j["degree"] = truth.params.degree;
    j["noise_halfwidth"] = truth.params.noise_halfwidth;
    j["base"] = matrix_to_json(truth.params.base);
  }
  return j;
}

Predictor predictor_from_json(const json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    const auto p = j.at("features").get<std::size_t>();
    const auto d = j.at("dimension").get<std::size_t>();
    if (kind == "linear") {
      const Eigen::MatrixXd coef = matrix_from_json(j.at("coefficients"), static_cast<Eigen::Index>(p + 1));
      if (static_cast<std::size_t>(coef.rows()) != d) throw InputError("coefficient rows differ from dimension");
      return LinearPredictor(coef);
    }
    if (kind == "forest") {
      std::vector<RegressionTree> trees;
      for (const auto& t : j.at("trees")) {
        const auto& feature = t.at("feature");
        const std::size_t count = feature.size();
        std::vector<RegressionTree::Node> nodes(count);
        for (std::size_t i = 0; i < count; ++i) {
          auto& n = nodes[i];
          n.feature = feature[i].get<int>();
          n.threshold = t.at("threshold").at(i).get<double>();
          n.left = t.at("left").at(i).get<int>();
          n.right = t.at("right").at(i).get<int>();
          n.leaf = t.at("leaf").at(i).get<int>();
          n.samples = t.at("samples").at(i).get<std::size_t>();
        }
        trees.emplace_back(std::move(nodes), matrix_from_json(t.at("leaf_values"), static_cast<Eigen::Index>(d)));
      }
      return ForestPredictor(std::move(trees), p, d);
    }
    if (kind == "true-mean") {
      TrueMeanPredictor truth;
      truth.params.features = p;
      truth.params.degree = j.at("degree").get<int>();
      truth.params.noise_halfwidth = j.at("noise_halfwidth").get<double>();
      truth.params.base = matrix_from_json(j.at("base"), static_cast<Eigen::Index>(p));
      truth.params.validate();
      return truth;
    }
    throw InputError("unknown predictor kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed predictor JSON: ") + e.what());
  }
}

Predictor load_predictor(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InputError("cannot parse '" + path + "': " + e.what());
  }
  return predictor_from_json(j);
}

void save_predictor(const Predictor& predictor, const std::string& path) {
  auto out = open_out(path);
  out << predictor_to_json(predictor).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Datasets

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const auto& m = data.meta;
  if (!m.problem.empty()) out << "# problem: " << m.problem << '\n';
  out << "# degree: " << m.degree << '\n';
  out << "# noise_halfwidth: " << format_double(m.noise_halfwidth) << '\n';
  out << "# seed: " << m.seed << '\n';
  if (m.crossing) out << "# crossing: " << format_double(*m.crossing) << '\n';
  if (m.base.size() > 0) {
    out << "# base: ";
    for (Eigen::Index r = 0; r < m.base.rows(); ++r) {
      if (r > 0) out << ';';
      for (Eigen::Index c = 0; c < m.base.cols(); ++c) out << (c > 0 ? " " : "") << format_double(m.base(r, c));
    }
    out << '\n';
  }
  const auto p = data.contexts.cols();
  const auto d = data.costs.cols();
  for (Eigen::Index k = 0; k < p; ++k) out << (k > 0 ? "," : "") << "z_" << k;
  for (Eigen::Index k = 0; k < d; ++k) out << (p + k > 0 ? "," : "") << "c_" << k;
  out << '\n';
  for (Eigen::Index i = 0; i < data.contexts.rows(); ++i) {
    for (Eigen::Index k = 0; k < p; ++k) out << (k > 0 ? "," : "") << format_double(data.contexts(i, k));
    for (Eigen::Index k = 0; k < d; ++k) out << (p + k > 0 ? "," : "") << format_double(data.costs(i, k));
    out << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in) {
  Dataset data;
  std::string line;
  std::vector<std::string> header;
  std::string base_text;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = trim(line.substr(1, colon - 1));
      const std::string value = trim(line.substr(colon + 1));
      if (key == "problem") data.meta.problem = value;
      else if (key == "degree") data.meta.degree = std::stoi(value);
      else if (key == "noise_halfwidth") data.meta.noise_halfwidth = parse_double(value);
      else if (key == "seed") data.meta.seed = parse_unsigned<std::uint64_t>(value);
      else if (key == "crossing") data.meta.crossing = parse_double(value);
      else if (key == "base") base_text = value;
      continue;
    }
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw InputError("dataset CSV has no header row");
  std::size_t p = 0;
  while (p < header.size() && header[p] == "z_" + std::to_string(p)) ++p;
  const std::size_t d = header.size() - p;
  for (std::size_t k = 0; k < d; ++k) {
    if (header[p + k] != "c_" + std::to_string(k)) {
      throw InputError("unexpected dataset column '" + header[p + k] + "'");
    }
  }
  if (d == 0) throw InputError("dataset CSV has no cost columns");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw InputError("data row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                       " fields, expected " + std::to_string(header.size()));
    }
    std::vector<double> values;
    values.reserve(fields.size());
    for (const auto& f : fields) values.push_back(parse_double(f));
    rows.push_back(std::move(values));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  data.contexts.resize(n, static_cast<Eigen::Index>(p));
  data.costs.resize(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < p; ++k) data.contexts(i, static_cast<Eigen::Index>(k)) = r[k];
    for (std::size_t k = 0; k < d; ++k) data.costs(i, static_cast<Eigen::Index>(k)) = r[p + k];
  }
  if (!base_text.empty()) {
    std::vector<std::vector<double>> base_rows;
    std::stringstream ss(base_text);
    std::string row_text;
    while (std::getline(ss, row_text, ';')) {
      std::stringstream rs(row_text);
      std::string cell;
      base_rows.emplace_back();
      while (rs >> cell) base_rows.back().push_back(parse_double(cell));
    }
    const auto cols = base_rows.empty() ? 0 : base_rows.front().size();
    data.meta.base.resize(static_cast<Eigen::Index>(base_rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < base_rows.size(); ++r) {
      if (base_rows[r].size() != cols) throw InputError("ragged base matrix in dataset metadata");
      for (std::size_t c = 0; c < cols; ++c) {
        data.meta.base(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = base_rows[r][c];
      }
    }
  }
  data.validate();
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  auto out = open_out(path);
  write_dataset_csv(out, data);
}

Dataset load_dataset(const std::string& path) {
  auto in = open_in(path);
  return read_dataset_csv(in);
}

// ---------------------------------------------------------------------------
// Records and logs

const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> columns{
      "replication",     "method",          "nu",        "k",          "degree",           "n_train",
      "mean_regret",     "normalized_regret", "test_mse", "train_seconds", "improvement_abs", "improvement_rel",
      "regret_reference", "test_hash",       "status"};
  return columns;
}

void write_record_header(std::ostream& out) {
  const auto& cols = record_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i > 0 ? "," : "") << cols[i];
  out << '\n';
}

void write_record_row(std::ostream& out, const ExperimentRecord& r) {
  out << r.replication << ',' << csv_field(r.method) << ',' << format_double(r.nu) << ',' << r.k << ',' << r.degree
      << ',' << r.n_train << ',' << format_double(r.mean_regret) << ',' << format_double(r.normalized_regret) << ','
      << format_double(r.test_mse) << ',' << format_double(r.train_seconds) << ',' << format_double(r.improvement_abs)
      << ',' << format_double(r.improvement_rel) << ',' << csv_field(r.regret_reference) << ','
      << csv_field(r.test_hash) << ',' << csv_field(r.status) << '\n';
}

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  write_record_header(out);
  for (const auto& r : records) write_record_row(out, r);
}

std::vector<ExperimentRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("records CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (split_csv_line(line) != record_columns()) throw InputError("records CSV header does not match the schema");
  std::vector<ExperimentRecord> records;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != record_columns().size()) throw InputError("records CSV row has the wrong number of fields");
    ExperimentRecord r;
    r.replication = parse_unsigned<std::size_t>(f[0]);
    r.method = f[1];
    r.nu = parse_double(f[2]);
    r.k = parse_unsigned<std::size_t>(f[3]);
    r.degree = std::stoi(f[4]);
    r.n_train = parse_unsigned<std::size_t>(f[5]);
    r.mean_regret = parse_double(f[6]);
    r.normalized_regret = parse_double(f[7]);
    r.test_mse = parse_double(f[8]);
    r.train_seconds = parse_double(f[9]);
    r.improvement_abs = parse_double(f[10]);
    r.improvement_rel = parse_double(f[11]);
    r.regret_reference = f[12];
    r.test_hash = f[13];
    r.status = f[14];
    records.push_back(std::move(r));
  }
  return records;
}

void write_trace_csv(std::ostream& out, const FitTrace& trace) {
  out << "round,mean_weight,frac_zero,weighted_mse,mean_regret\n";
  for (const auto& r : trace.rounds) {
    out << r.round << ',' << format_double(r.mean_weight) << ',' << format_double(r.frac_zero) << ','
        << format_double(r.weighted_mse) << ',' << format_double(r.mean_regret) << '\n';
  }
}

void write_spo_log_csv(std::ostream& out, const SpoPlusLog& log) {
  out << "epoch,train_spo_loss,val_regret,elapsed_seconds\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << format_double(e.train_spo_loss) << ',' << format_double(e.val_regret) << ','
        << format_double(e.elapsed_seconds) << '\n';
  }
}

}  // namespace dapto
