// Fit container: one JSON header line (dims, sampler settings, seed, labels)
// followed by fixed-size little-endian records. The first record is the
// least-squares starting point; each subsequent record is one stored draw.
// Record layout: B1 then B2 then B3, each column-major (first index
// fastest), then sigma2.
#pragma once

#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <string>

#include "mltr/estimation.hpp"

namespace mltr {

constexpr int kFitFormatVersion = 1;

namespace detail {

inline void write_coef_record(std::ostream& out, const CoefficientSet& c) {
  out.write(reinterpret_cast<const char*>(c.b1.data()),
            static_cast<std::streamsize>(c.b1.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(c.b2.data()),
            static_cast<std::streamsize>(c.b2.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(c.b3.data()),
            static_cast<std::streamsize>(c.b3.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(&c.sigma2), sizeof(double));
}

inline CoefficientSet read_coef_record(std::istream& in, Index m, Index v) {
  CoefficientSet c;
  c.b1.resize(m, m);
  c.b2.resize(m, m);
  c.b3.resize(v, 3 * v);
  in.read(reinterpret_cast<char*>(c.b1.data()),
          static_cast<std::streamsize>(c.b1.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(c.b2.data()),
          static_cast<std::streamsize>(c.b2.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(c.b3.data()),
          static_cast<std::streamsize>(c.b3.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(&c.sigma2), sizeof(double));
  if (!in) throw std::runtime_error("load_fit: truncated coefficient record");
  return c;
}

}  // namespace detail

inline void save_fit(const std::string& path, const FitResult& fit,
                     const std::string& method = "gibbs") {
  nlohmann::json header;
  header["format"] = "mltr.fit";
  header["version"] = kFitFormatVersion;
  header["endianness"] = "little";
  header["method"] = method;
  header["m"] = fit.m;
  header["v"] = fit.v;
  header["horizon"] = fit.horizon;
  header["draws"] = fit.chain.size();
  header["rank_deficient_start"] = fit.rank_deficient_start;
  header["actors"] = fit.actors;
  header["variables"] = fit.variables;
  header["spec"] = {{"iterations", fit.spec.iterations},
                    {"burn_in", fit.spec.burn_in},
                    {"seed", fit.spec.seed},
                    {"tau2", fit.spec.tau2},
                    {"sigma2_shape", fit.spec.sigma2_shape},
                    {"sigma2_scale", fit.spec.sigma2_scale},
                    {"als_tolerance", fit.spec.als_tolerance},
                    {"als_max_sweeps", fit.spec.als_max_sweeps}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_fit: cannot open " + path);
  out << header.dump() << '\n';
  detail::write_coef_record(out, fit.als_start);
  for (const auto& draw : fit.chain) detail::write_coef_record(out, draw);
  if (!out) throw std::runtime_error("save_fit: write failed for " + path);
}

struct LoadedFit {
  FitResult fit;
  std::string method;
};

inline LoadedFit load_fit(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_fit: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_fit: missing header in " + path);
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "mltr.fit")
    throw std::runtime_error("load_fit: " + path + " is not a fit container");
  if (header.value("version", 0) != kFitFormatVersion)
    throw std::runtime_error("load_fit: unsupported fit version in " + path);

  LoadedFit loaded;
  loaded.method = header.value("method", "gibbs");
  FitResult& fit = loaded.fit;
  fit.m = header.at("m").get<Index>();
  fit.v = header.at("v").get<Index>();
  fit.horizon = header.at("horizon").get<Index>();
  fit.rank_deficient_start = header.value("rank_deficient_start", false);
  fit.actors = header.value("actors", std::vector<std::string>{});
  fit.variables = header.value("variables", std::vector<std::string>{});
  const auto& spec = header.at("spec");
  fit.spec.iterations = spec.at("iterations").get<int>();
  fit.spec.burn_in = spec.at("burn_in").get<int>();
  fit.spec.seed = spec.at("seed").get<std::uint64_t>();
  fit.spec.tau2 = spec.at("tau2").get<double>();
  fit.spec.sigma2_shape = spec.at("sigma2_shape").get<double>();
  fit.spec.sigma2_scale = spec.at("sigma2_scale").get<double>();
  fit.spec.als_tolerance = spec.at("als_tolerance").get<double>();
  fit.spec.als_max_sweeps = spec.at("als_max_sweeps").get<int>();

  const std::size_t draws = header.at("draws").get<std::size_t>();
  fit.als_start = detail::read_coef_record(in, fit.m, fit.v);
  fit.chain.reserve(draws);
  for (std::size_t k = 0; k < draws; ++k)
    fit.chain.push_back(detail::read_coef_record(in, fit.m, fit.v));
  return loaded;
}

}  // namespace mltr
