// Batch run configuration: a single JSON file with nested sections, strict
// key checking (unknown keys are hard errors, not warnings) and a run
// manifest that records inputs, outputs, seed and content hashes so a run
// can be reproduced exactly.
#pragma once

#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mltr/estimation.hpp"
#include "mltr/fit_io.hpp"
#include "mltr/ingest.hpp"
#include "mltr/tensor_io.hpp"
#include "mltr/version.hpp"

namespace mltr {

// FNV-1a 64-bit content hash; good enough to detect accidental input drift
// in manifests (not a cryptographic digest).
inline std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t k = 0; k < size; ++k) {
    h ^= bytes[k];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("hash_file: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string s = buf.str();
  char out[32];
  std::snprintf(out, sizeof out, "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(s.data(), s.size())));
  return out;
}

namespace detail {

inline void require_keys(const nlohmann::json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
  if (!obj.is_object())
    throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key '" + where + "." + key + "'");
}

inline Matrix matrix_from_json(const nlohmann::json& spec, Index rows, Index cols,
                               const std::string& where) {
  if (spec.is_string()) {
    const std::string tag = spec.get<std::string>();
    if (tag == "identity") {
      if (rows != cols)
        throw std::invalid_argument("config: " + where + ": identity needs a square shape");
      return Matrix::Identity(rows, cols);
    }
    if (tag == "zero") return Matrix::Zero(rows, cols);
    throw std::invalid_argument("config: " + where + ": unknown matrix tag '" + tag + "'");
  }
  if (!spec.is_array() || static_cast<Index>(spec.size()) != rows)
    throw std::invalid_argument("config: " + where + ": expected " + std::to_string(rows) +
                                " rows");
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = spec[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw std::invalid_argument("config: " + where + ": row " + std::to_string(i + 1) +
                                  " must have " + std::to_string(cols) + " entries");
    for (Index j = 0; j < cols; ++j) out(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return out;
}

}  // namespace detail

struct SimulateConfig {
  Index m = 0, v = 0, n = 0;
  double sigma = 0.1;
  std::uint64_t seed = 1;
  nlohmann::json b1 = "identity", b2 = "identity", b3 = "zero";

  CoefficientSet coefficients() const {
    CoefficientSet c;
    c.b1 = detail::matrix_from_json(b1, m, m, "simulate.b1");
    c.b2 = detail::matrix_from_json(b2, m, m, "simulate.b2");
    c.b3 = detail::matrix_from_json(b3, v, 3 * v, "simulate.b3");
    return c;
  }
};

struct PreprocessingConfig {
  bool qq_normalize = true;
  bool demean = false;
  bool standardize_transitive = true;
};

struct OutputConfig {
  std::string dir = "out";
  std::vector<std::string> exports;  // empty means the command defaults
};

struct InputConfig {
  std::string events, cameo_map, tensor, fit, observed, predicted;
};

struct RunConfig {
  InputConfig input;
  OutputConfig output;
  std::optional<AggregationConfig> aggregation;
  PreprocessingConfig preprocessing;
  ModelSpec model;
  std::string method = "gibbs";
  std::vector<std::string> variables;  // optional subset for fit/evaluate
  std::optional<SimulateConfig> simulate;

  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig from_file(const std::string& path);

  bool wants(const std::string& expo, bool fallback) const {
    if (output.exports.empty()) return fallback;
    for (const auto& e : output.exports)
      if (e == expo) return true;
    return false;
  }
};

inline RunConfig RunConfig::from_json(const nlohmann::json& doc) {
  detail::require_keys(doc, "<root>",
                       {"input", "output", "aggregation", "preprocessing", "model",
                        "variables", "simulate"});
  RunConfig cfg;

  if (doc.contains("input")) {
    const auto& in = doc.at("input");
    detail::require_keys(in, "input",
                         {"events", "cameo_map", "tensor", "fit", "observed", "predicted"});
    cfg.input.events = in.value("events", "");
    cfg.input.cameo_map = in.value("cameo_map", "");
    cfg.input.tensor = in.value("tensor", "");
    cfg.input.fit = in.value("fit", "");
    cfg.input.observed = in.value("observed", "");
    cfg.input.predicted = in.value("predicted", "");
  }

  if (doc.contains("output")) {
    const auto& out = doc.at("output");
    detail::require_keys(out, "output", {"dir", "exports"});
    cfg.output.dir = out.value("dir", "out");
    if (out.contains("exports")) {
      static const std::set<std::string> known = {
          "b3_summary", "trace",     "edges",     "diagonal",  "convergence",
          "rmse_grid",  "rmse_long", "rmse_json", "tensor_csv"};
      for (const auto& e : out.at("exports")) {
        const std::string name = e.get<std::string>();
        if (!known.count(name))
          throw std::invalid_argument("config: unknown export '" + name + "'");
        cfg.output.exports.push_back(name);
      }
    }
  }

  if (doc.contains("aggregation")) {
    const auto& agg = doc.at("aggregation");
    detail::require_keys(agg, "aggregation", {"actors", "variables", "start", "end"});
    AggregationConfig a;
    for (const auto& s : agg.at("actors")) a.actors.push_back(s.get<std::string>());
    for (const auto& s : agg.at("variables")) {
      const auto q = quad_from_string(s.get<std::string>());
      if (!q)
        throw std::invalid_argument("config: aggregation.variables: unknown quad class '" +
                                    s.get<std::string>() + "'");
      a.variables.push_back(*q);
    }
    const auto start = parse_year_month(agg.at("start").get<std::string>());
    const auto end = parse_year_month(agg.at("end").get<std::string>());
    if (!start || !end)
      throw std::invalid_argument("config: aggregation.start/end must be YYYY-MM");
    a.start = *start;
    a.end = *end;
    cfg.aggregation = std::move(a);
  }

  if (doc.contains("preprocessing")) {
    const auto& pre = doc.at("preprocessing");
    detail::require_keys(pre, "preprocessing",
                         {"qq_normalize", "demean", "standardize_transitive"});
    cfg.preprocessing.qq_normalize = pre.value("qq_normalize", true);
    cfg.preprocessing.demean = pre.value("demean", false);
    cfg.preprocessing.standardize_transitive = pre.value("standardize_transitive", true);
  }

  if (doc.contains("model")) {
    const auto& mod = doc.at("model");
    detail::require_keys(mod, "model",
                         {"method", "iterations", "burn_in", "seed", "tau2", "sigma2_shape",
                          "sigma2_scale", "als_tolerance", "als_max_sweeps"});
    cfg.method = mod.value("method", "gibbs");
    if (cfg.method != "gibbs" && cfg.method != "als")
      throw std::invalid_argument("config: model.method must be 'gibbs' or 'als'");
    cfg.model.iterations = mod.value("iterations", cfg.model.iterations);
    cfg.model.burn_in = mod.value("burn_in", cfg.model.burn_in);
    cfg.model.seed = mod.value("seed", cfg.model.seed);
    cfg.model.tau2 = mod.value("tau2", cfg.model.tau2);
    cfg.model.sigma2_shape = mod.value("sigma2_shape", cfg.model.sigma2_shape);
    cfg.model.sigma2_scale = mod.value("sigma2_scale", cfg.model.sigma2_scale);
    cfg.model.als_tolerance = mod.value("als_tolerance", cfg.model.als_tolerance);
    cfg.model.als_max_sweeps = mod.value("als_max_sweeps", cfg.model.als_max_sweeps);
    cfg.model.validate();
  }

  if (doc.contains("variables"))
    for (const auto& s : doc.at("variables")) cfg.variables.push_back(s.get<std::string>());

  if (doc.contains("simulate")) {
    const auto& sim = doc.at("simulate");
    detail::require_keys(sim, "simulate", {"m", "v", "n", "sigma", "seed", "b1", "b2", "b3"});
    SimulateConfig s;
    s.m = sim.at("m").get<Index>();
    s.v = sim.at("v").get<Index>();
    s.n = sim.at("n").get<Index>();
    s.sigma = sim.value("sigma", 0.1);
    s.seed = sim.value("seed", std::uint64_t{1});
    if (sim.contains("b1")) s.b1 = sim.at("b1");
    if (sim.contains("b2")) s.b2 = sim.at("b2");
    if (sim.contains("b3")) s.b3 = sim.at("b3");
    cfg.simulate = std::move(s);
  }
  return cfg;
}

inline RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: " + path + " is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

// Accumulates what a command consumed and produced; written last so output
// hashes are final. Contains no wall-clock data, keeping reruns
// byte-identical.
class Manifest {
 public:
  Manifest(std::string command, std::string out_dir)
      : command_(std::move(command)), out_dir_(std::move(out_dir)) {
    doc_["command"] = command_;
    doc_["versions"] = {{"mltr", kVersion},
                        {"tensor_format", kTensorFormatVersion},
                        {"fit_format", kFitFormatVersion}};
  }

  void record_config(const std::string& path) {
    doc_["config"] = path;
    doc_["config_hash"] = hash_file(path);
  }
  void record_input(const std::string& path) { doc_["inputs"][path] = hash_file(path); }
  void record_output(const std::string& path) { outputs_.push_back(path); }
  void set(const std::string& key, const nlohmann::json& value) { doc_[key] = value; }

  std::string write() {
    for (const auto& path : outputs_) doc_["outputs"][path] = hash_file(path);
    const std::string path = out_dir_ + "/" + command_ + "_manifest.json";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot open " + path);
    out << doc_.dump(2) << '\n';
    return path;
  }

 private:
  std::string command_, out_dir_;
  std::vector<std::string> outputs_;
  nlohmann::json doc_;
};

}  // namespace mltr
