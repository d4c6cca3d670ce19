// Turns coded dyadic event records into a RelationalSeries and generates
// synthetic panels from known coefficients for verification runs.
#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mltr/design.hpp"
#include "mltr/estimation.hpp"
#include "mltr/rng.hpp"

namespace mltr {

enum class QuadClass { verbal_coop, material_coop, verbal_conf, material_conf };

inline const char* to_string(QuadClass q) {
  switch (q) {
    case QuadClass::verbal_coop: return "verbal_coop";
    case QuadClass::material_coop: return "material_coop";
    case QuadClass::verbal_conf: return "verbal_conf";
    case QuadClass::material_conf: return "material_conf";
  }
  return "?";
}

inline std::optional<QuadClass> quad_from_string(const std::string& s) {
  if (s == "verbal_coop") return QuadClass::verbal_coop;
  if (s == "material_coop") return QuadClass::material_coop;
  if (s == "verbal_conf") return QuadClass::verbal_conf;
  if (s == "material_conf") return QuadClass::material_conf;
  return std::nullopt;
}

struct Date {
  int year = 0, month = 0, day = 0;
};

inline std::optional<Date> parse_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  for (std::size_t k : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (!std::isdigit(static_cast<unsigned char>(s[k]))) return std::nullopt;
  Date d;
  d.year = std::stoi(s.substr(0, 4));
  d.month = std::stoi(s.substr(5, 2));
  d.day = std::stoi(s.substr(8, 2));
  if (d.month < 1 || d.month > 12) return std::nullopt;
  static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int dim = days[d.month - 1];
  const bool leap = (d.year % 4 == 0 && d.year % 100 != 0) || d.year % 400 == 0;
  if (d.month == 2 && leap) dim = 29;
  if (d.day < 1 || d.day > dim) return std::nullopt;
  return d;
}

struct EventRecord {
  Date date;
  std::string source, target;
  QuadClass quad = QuadClass::verbal_coop;
  long count = 1;
};

// Optional translation of CAMEO root codes to quad classes, loaded from a
// two-column CSV (cameo_root,quad_class).
using CameoMap = std::map<std::string, QuadClass>;

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ' || f.back() == '\t')) f.pop_back();
    std::size_t b = 0;
    while (b < f.size() && (f[b] == ' ' || f[b] == '\t')) ++b;
    f.erase(0, b);
  }
  return fields;
}

}  // namespace detail

inline CameoMap load_cameo_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_cameo_map: cannot open " + path);
  CameoMap map;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto fields = detail::split_csv_line(line);
    if (line_no == 1 && fields.size() == 2 && fields[0] == "cameo_root") continue;
    if (fields.size() != 2)
      throw std::runtime_error("load_cameo_map: line " + std::to_string(line_no) +
                               ": expected cameo_root,quad_class");
    auto quad = quad_from_string(fields[1]);
    if (!quad)
      throw std::runtime_error("load_cameo_map: line " + std::to_string(line_no) +
                               ": unknown quad class '" + fields[1] + "'");
    map[fields[0]] = *quad;
  }
  return map;
}

struct ParseIssue {
  int line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<EventRecord> records;
  std::vector<ParseIssue> issues;
};

// Reads event CSV rows with header date,source,target,quad_class[,count].
// Malformed rows are collected with their line numbers instead of aborting
// the whole file. The quad_class field accepts the four class names
// directly, or CAMEO root codes when a mapping is supplied.
inline ParseResult parse_events(std::istream& in, const CameoMap* cameo = nullptr) {
  ParseResult result;
  std::string line;
  int line_no = 0;
  bool has_count = false;
  if (!std::getline(in, line)) {
    result.issues.push_back({1, "empty file"});
    return result;
  }
  ++line_no;
  {
    const auto header = detail::split_csv_line(line);
    const bool base_ok = header.size() >= 4 && header[0] == "date" && header[1] == "source" &&
                         header[2] == "target" && header[3] == "quad_class";
    if (base_ok && header.size() == 5 && header[4] == "count") {
      has_count = true;
    } else if (!base_ok || header.size() != 4) {
      result.issues.push_back(
          {1, "unrecognized header; expected date,source,target,quad_class[,count]"});
      return result;
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto fields = detail::split_csv_line(line);
    const std::size_t expected = has_count ? 5 : 4;
    if (fields.size() != expected) {
      result.issues.push_back({line_no, "expected " + std::to_string(expected) + " fields, got " +
                                            std::to_string(fields.size())});
      continue;
    }
    EventRecord rec;
    auto date = parse_date(fields[0]);
    if (!date) {
      result.issues.push_back({line_no, "unparseable date '" + fields[0] + "'"});
      continue;
    }
    rec.date = *date;
    rec.source = fields[1];
    rec.target = fields[2];
    if (rec.source.empty() || rec.target.empty()) {
      result.issues.push_back({line_no, "empty actor code"});
      continue;
    }
    if (rec.source == rec.target) {
      result.issues.push_back({line_no, "self-dyad: source equals target ('" + rec.source + "')"});
      continue;
    }
    auto quad = quad_from_string(fields[3]);
    if (!quad && cameo) {
      auto it = cameo->find(fields[3]);
      if (it != cameo->end()) quad = it->second;
    }
    if (!quad) {
      result.issues.push_back({line_no, "unknown quad class '" + fields[3] + "'"});
      continue;
    }
    rec.quad = *quad;
    if (fields.size() == 5 && !fields[4].empty()) {
      try {
        std::size_t pos = 0;
        const long c = std::stol(fields[4], &pos);
        if (pos != fields[4].size() || c <= 0) throw std::invalid_argument("");
        rec.count = c;
      } catch (...) {
        result.issues.push_back({line_no, "count must be a positive integer, got '" + fields[4] + "'"});
        continue;
      }
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

inline ParseResult parse_events_file(const std::string& path, const CameoMap* cameo = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_events: cannot open " + path);
  return parse_events(in, cameo);
}

struct YearMonth {
  int year = 0, month = 0;  // month 1..12
};

inline std::optional<YearMonth> parse_year_month(const std::string& s) {
  if (s.size() != 7 || s[4] != '-') return std::nullopt;
  for (std::size_t k : {0u, 1u, 2u, 3u, 5u, 6u})
    if (!std::isdigit(static_cast<unsigned char>(s[k]))) return std::nullopt;
  YearMonth ym;
  ym.year = std::stoi(s.substr(0, 4));
  ym.month = std::stoi(s.substr(5, 2));
  if (ym.month < 1 || ym.month > 12) return std::nullopt;
  return ym;
}

inline int month_index(const YearMonth& origin, int year, int month) {
  return (year - origin.year) * 12 + (month - origin.month);
}

struct AggregationConfig {
  std::vector<std::string> actors;      // ordered; defines the actor mode
  std::vector<QuadClass> variables;     // ordered subset of the quad classes
  YearMonth start, end;                 // inclusive calendar-month range (UTC)

  void validate() const {
    if (actors.size() < 3)
      throw std::invalid_argument("AggregationConfig: need at least 3 actors");
    std::vector<std::string> sorted = actors;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("AggregationConfig: duplicate actor code");
    if (variables.empty())
      throw std::invalid_argument("AggregationConfig: empty variable subset");
    if (month_index(start, end.year, end.month) < 1)
      throw std::invalid_argument("AggregationConfig: range must span at least 2 months");
  }
};

struct AggregateReport {
  std::size_t used = 0;
  std::size_t dropped_actor = 0;
  std::size_t dropped_variable = 0;
  std::size_t dropped_period = 0;
};

// Sums counts per (source, target, variable, month). Months without events
// stay zero; records outside the actor list, variable subset or date range
// are dropped and tallied.
inline RelationalSeries aggregate(const std::vector<EventRecord>& records,
                                  const AggregationConfig& config,
                                  AggregateReport* report = nullptr) {
  config.validate();
  const Index m = static_cast<Index>(config.actors.size());
  const Index v = static_cast<Index>(config.variables.size());
  const Index n = month_index(config.start, config.end.year, config.end.month) + 1;

  std::map<std::string, Index> actor_of;
  for (Index i = 0; i < m; ++i) actor_of[config.actors[static_cast<std::size_t>(i)]] = i;
  std::map<QuadClass, Index> var_of;
  for (Index w = 0; w < v; ++w) var_of[config.variables[static_cast<std::size_t>(w)]] = w;

  RelationalSeries series;
  series.actors = config.actors;
  for (auto q : config.variables) series.variables.emplace_back(to_string(q));
  series.data = Tensor4(m, m, v, n);
  for (Index t = 0; t < n; ++t) {
    const int months = config.start.month - 1 + static_cast<int>(t);
    const int year = config.start.year + months / 12;
    const int month = months % 12 + 1;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    series.periods.emplace_back(buf);
  }

  AggregateReport local;
  for (const auto& rec : records) {
    const auto src = actor_of.find(rec.source);
    const auto dst = actor_of.find(rec.target);
    if (src == actor_of.end() || dst == actor_of.end()) {
      ++local.dropped_actor;
      continue;
    }
    const auto var = var_of.find(rec.quad);
    if (var == var_of.end()) {
      ++local.dropped_variable;
      continue;
    }
    const Index t = month_index(config.start, rec.date.year, rec.date.month);
    if (t < 0 || t >= n) {
      ++local.dropped_period;
      continue;
    }
    series.data(src->second, dst->second, var->second, t) += static_cast<double>(rec.count);
    ++local.used;
  }
  if (report) *report = local;
  series.validate();
  return series;
}

// Spectral radius of the linear part of the autoregression (direct plus
// reciprocal blocks; the transitive statistic is quadratic and vanishes to
// first order at the zero state). Estimated by power iteration on the
// m*m*v operator.
inline double linear_spectral_radius(const CoefficientSet& c, Index m, Index v) {
  std::vector<Matrix> state(static_cast<std::size_t>(v)), next(static_cast<std::size_t>(v));
  Rng rng(0xA5EED);
  for (auto& s : state) {
    s.resize(m, m);
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < m; ++i) s(i, j) = rng.normal();
  }
  const int iters = 256;
  const int tail = 64;
  double log_rate = 0.0;
  for (int k = 0; k < iters; ++k) {
    double norm2 = 0.0;
    for (Index u = 0; u < v; ++u) {
      Matrix inner = Matrix::Zero(m, m);
      for (Index w = 0; w < v; ++w)
        inner += c.b3(u, w) * state[static_cast<std::size_t>(w)] +
                 c.b3(u, v + w) * state[static_cast<std::size_t>(w)].transpose();
      next[static_cast<std::size_t>(u)] = c.b1 * inner * c.b2.transpose();
      norm2 += next[static_cast<std::size_t>(u)].squaredNorm();
    }
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) return 0.0;
    for (auto& nx : next) nx /= norm;
    std::swap(state, next);
    if (k >= iters - tail) log_rate += std::log(norm);
  }
  return std::exp(log_rate / static_cast<double>(tail));
}

// Iterates the autoregression from a zero initial state with i.i.d. normal
// noise of scale sigma on the off-diagonal cells, building the design slices
// exactly as build_design does. Rejects coefficient sets whose linear map
// has spectral radius >= 1.
inline RelationalSeries simulate_synthetic(Index m, Index v, Index n, const CoefficientSet& c,
                                           double sigma, std::uint64_t seed) {
  if (m < 3 || v < 1 || n < 2)
    throw std::invalid_argument("simulate_synthetic: need m >= 3, v >= 1, n >= 2");
  if (c.b1.rows() != m || c.b1.cols() != m || c.b2.rows() != m || c.b2.cols() != m ||
      c.b3.rows() != v || c.b3.cols() != 3 * v)
    throw std::invalid_argument("simulate_synthetic: coefficient dims inconsistent with m, v");
  if (!(sigma >= 0.0)) throw std::invalid_argument("simulate_synthetic: sigma must be >= 0");
  const double radius = linear_spectral_radius(c, m, v);
  if (radius >= 1.0)
    throw std::invalid_argument("simulate_synthetic: unstable coefficients, spectral radius " +
                                std::to_string(radius));

  RelationalSeries series;
  series.actors = default_labels("a", m);
  series.variables = default_labels("v", v);
  series.periods = default_labels("t", n);
  series.data = Tensor4(m, m, v, n);

  Rng rng(seed);
  std::vector<Matrix> prev(static_cast<std::size_t>(v), Matrix::Zero(m, m));
  std::vector<Matrix> cur(static_cast<std::size_t>(v));
  for (Index t = 0; t < n; ++t) {
    std::vector<Matrix> trans(static_cast<std::size_t>(v));
    for (Index w = 0; w < v; ++w)
      trans[static_cast<std::size_t>(w)] = transitivity_slice(prev[static_cast<std::size_t>(w)]);
    for (Index u = 0; u < v; ++u) {
      Matrix inner = Matrix::Zero(m, m);
      for (Index w = 0; w < v; ++w)
        inner += c.b3(u, w) * prev[static_cast<std::size_t>(w)] +
                 c.b3(u, v + w) * prev[static_cast<std::size_t>(w)].transpose() +
                 c.b3(u, 2 * v + w) * trans[static_cast<std::size_t>(w)];
      cur[static_cast<std::size_t>(u)] = c.b1 * inner * c.b2.transpose();
    }
    for (Index w = 0; w < v; ++w) {
      Matrix& slab = cur[static_cast<std::size_t>(w)];
      for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < m; ++i) {
          if (i == j) {
            slab(i, j) = 0.0;
            continue;
          }
          slab(i, j) += sigma * rng.normal();
          if (std::abs(slab(i, j)) > 1e8)
            throw std::runtime_error("simulate_synthetic: trajectory diverged at period " +
                                     std::to_string(t + 1));
          series.data(i, j, w, t) = slab(i, j);
        }
    }
    prev = cur;
  }
  return series;
}

}  // namespace mltr
