#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "dapto/datagen.hpp"
#include "dapto/decision_aware.hpp"
#include "dapto/experiment.hpp"
#include "dapto/predictor.hpp"
#include "dapto/spo_plus.hpp"

namespace dapto {

// Config JSON. Unknown keys are rejected; missing keys keep their defaults.
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

// Predictor JSON:
//   {"kind": "linear", "features": p, "dimension": d, "coefficients": [[intercept, w_1..w_p] per output]}
//   {"kind": "forest", "features": p, "dimension": d, "trees": [{"feature": [...], "threshold": [...],
//        "left": [...], "right": [...], "leaf": [...], "samples": [...], "leaf_values": [[...] per leaf]}]}
//   {"kind": "true-mean", "features": p, "dimension": d, "degree": k, "noise_halfwidth": w, "base": [[...]]}
nlohmann::json predictor_to_json(const Predictor& predictor);
Predictor predictor_from_json(const nlohmann::json& j);
Predictor load_predictor(const std::string& path);
void save_predictor(const Predictor& predictor, const std::string& path);

// Dataset CSV: optional "# key: value" metadata lines, then a header
// z_0..z_{p-1},c_0..c_{d-1} and one row per sample.
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

// Result CSVs with fixed column order and a mandatory header.
const std::vector<std::string>& record_columns();
void write_record_header(std::ostream& out);
void write_record_row(std::ostream& out, const ExperimentRecord& record);
void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> read_records_csv(std::istream& in);

void write_trace_csv(std::ostream& out, const FitTrace& trace);
void write_spo_log_csv(std::ostream& out, const SpoPlusLog& log);

/// Shortest round-trip representation of a double.
std::string format_double(double value);

}  // namespace dapto
