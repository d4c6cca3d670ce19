// Posterior summaries, credible-interval significance, coefficient networks,
// diagonal dominance, convergence statistics and RMSE surfaces, plus their
// CSV/JSON exports.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mltr/estimation.hpp"
#include "mltr/tensor_io.hpp"

namespace mltr {

// Empirical quantile by linear interpolation between order statistics:
// with n sorted values and h = (n-1)p, the quantile is
// x[floor(h)] + (h - floor(h)) * (x[floor(h)+1] - x[floor(h)]).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty sample");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct PosteriorSummary {
  std::string parameter;
  double mean = 0.0, sd = 0.0;
  double q005 = 0.0, q025 = 0.0, q05 = 0.0, q50 = 0.0, q95 = 0.0, q975 = 0.0, q995 = 0.0;
  bool sig90 = false, sig95 = false, sig99 = false;
};

inline PosteriorSummary summarize_scalar(std::string name, std::vector<double> draws) {
  if (draws.empty()) throw std::invalid_argument("summarize_scalar: empty chain");
  PosteriorSummary s;
  s.parameter = std::move(name);
  // moments are taken over the sorted sample, so summaries do not depend on
  // draw order even at the bit level
  std::sort(draws.begin(), draws.end());
  s.mean = mean_of(draws);
  s.sd = sample_sd(draws);
  s.q005 = quantile_sorted(draws, 0.005);
  s.q025 = quantile_sorted(draws, 0.025);
  s.q05 = quantile_sorted(draws, 0.05);
  s.q50 = quantile_sorted(draws, 0.50);
  s.q95 = quantile_sorted(draws, 0.95);
  s.q975 = quantile_sorted(draws, 0.975);
  s.q995 = quantile_sorted(draws, 0.995);
  const auto excludes_zero = [](double lo, double hi) { return lo > 0.0 || hi < 0.0; };
  s.sig90 = excludes_zero(s.q05, s.q95);
  s.sig95 = excludes_zero(s.q025, s.q975);
  s.sig99 = excludes_zero(s.q005, s.q995);
  return s;
}

enum class CoefBlock { b1, b2 };

namespace detail {

inline std::vector<double> extract_b3(const FitResult& fit, Index u, Index w) {
  std::vector<double> draws;
  draws.reserve(fit.chain.size());
  for (const auto& d : fit.chain) draws.push_back(d.b3(u, w));
  return draws;
}

inline std::vector<double> extract_b12(const FitResult& fit, CoefBlock which, Index i, Index j) {
  std::vector<double> draws;
  draws.reserve(fit.chain.size());
  for (const auto& d : fit.chain)
    draws.push_back(which == CoefBlock::b1 ? d.b1(i, j) : d.b2(i, j));
  return draws;
}

inline std::string actor_label(const FitResult& fit, Index i) {
  if (static_cast<std::size_t>(i) < fit.actors.size()) return fit.actors[static_cast<std::size_t>(i)];
  return "a" + std::to_string(i + 1);
}

inline std::string variable_label(const FitResult& fit, Index w) {
  if (static_cast<std::size_t>(w) < fit.variables.size())
    return fit.variables[static_cast<std::size_t>(w)];
  return "v" + std::to_string(w + 1);
}

}  // namespace detail

// Summaries for every scalar parameter: B1 and B2 row by row, B3 row by row,
// then sigma2. Parameter names use 1-based indices.
inline std::vector<PosteriorSummary> summarize_chain(const FitResult& fit) {
  if (fit.chain.empty()) throw std::invalid_argument("summarize_chain: empty chain");
  std::vector<PosteriorSummary> out;
  out.reserve(static_cast<std::size_t>(2 * fit.m * fit.m + 3 * fit.v * fit.v + 1));
  for (Index i = 0; i < fit.m; ++i)
    for (Index j = 0; j < fit.m; ++j)
      out.push_back(summarize_scalar(
          "B1[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]",
          detail::extract_b12(fit, CoefBlock::b1, i, j)));
  for (Index i = 0; i < fit.m; ++i)
    for (Index j = 0; j < fit.m; ++j)
      out.push_back(summarize_scalar(
          "B2[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]",
          detail::extract_b12(fit, CoefBlock::b2, i, j)));
  for (Index u = 0; u < fit.v; ++u)
    for (Index w = 0; w < 3 * fit.v; ++w)
      out.push_back(summarize_scalar(
          "B3[" + std::to_string(u + 1) + "][" + std::to_string(w + 1) + "]",
          detail::extract_b3(fit, u, w)));
  {
    std::vector<double> s2;
    s2.reserve(fit.chain.size());
    for (const auto& d : fit.chain) s2.push_back(d.sigma2);
    out.push_back(summarize_scalar("sigma2", std::move(s2)));
  }
  return out;
}

struct Edge {
  Index source, target;  // 1-based row (sender) and column (receiver) actor
  double mean, lo, hi;
};

struct DiagonalEntry {
  Index actor;  // 1-based
  double mean, lo, hi;
  bool significant;
};

// Off-diagonal entries whose credible interval at the level excludes zero,
// split by the sign of the posterior mean; diagonal entries are reported
// separately rather than as self-loops.
struct CoefficientNetwork {
  std::vector<Edge> positive;
  std::vector<Edge> negative;
  std::vector<DiagonalEntry> diagonal;
  double level = 0.99;
};

inline CoefficientNetwork coefficient_network(const FitResult& fit, CoefBlock which,
                                              double level = 0.99) {
  if (fit.chain.empty()) throw std::invalid_argument("coefficient_network: empty chain");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("coefficient_network: level must be in (0,1)");
  CoefficientNetwork net;
  net.level = level;
  const double plo = 0.5 * (1.0 - level);
  const double phi = 1.0 - plo;
  for (Index i = 0; i < fit.m; ++i)
    for (Index j = 0; j < fit.m; ++j) {
      std::vector<double> draws = detail::extract_b12(fit, which, i, j);
      const double mean = mean_of(draws);
      std::sort(draws.begin(), draws.end());
      const double lo = quantile_sorted(draws, plo);
      const double hi = quantile_sorted(draws, phi);
      const bool significant = lo > 0.0 || hi < 0.0;
      if (i == j) {
        net.diagonal.push_back({i + 1, mean, lo, hi, significant});
      } else if (significant && mean > 0.0) {
        net.positive.push_back({i + 1, j + 1, mean, lo, hi});
      } else if (significant) {
        net.negative.push_back({i + 1, j + 1, mean, lo, hi});
      }
    }
  return net;
}

// Mean absolute posterior mean of the diagonal over the same for the
// off-diagonal entries; +infinity when the off-diagonal means are all zero.
inline double diag_dominance(const FitResult& fit, CoefBlock which) {
  if (fit.chain.empty()) throw std::invalid_argument("diag_dominance: empty chain");
  Matrix means = Matrix::Zero(fit.m, fit.m);
  for (const auto& d : fit.chain) means += (which == CoefBlock::b1 ? d.b1 : d.b2);
  means /= static_cast<double>(fit.chain.size());
  double diag = 0.0, off = 0.0;
  for (Index i = 0; i < fit.m; ++i)
    for (Index j = 0; j < fit.m; ++j)
      (i == j ? diag : off) += std::abs(means(i, j));
  diag /= static_cast<double>(fit.m);
  off /= static_cast<double>(fit.m * (fit.m - 1));
  if (diag == 0.0 && off == 0.0)
    throw std::invalid_argument("diag_dominance: degenerate all-zero posterior means");
  if (off == 0.0) return std::numeric_limits<double>::infinity();
  return diag / off;
}

struct ConvergenceStat {
  std::string parameter;
  double rhat = 1.0;
  double ess = 0.0;
  bool zero_variance = false;
};

namespace detail {

// Split-chain potential scale reduction: each chain is halved and the
// halves are compared (between-half vs within-half variance).
inline ConvergenceStat convergence_of(std::string name,
                                      const std::vector<std::vector<double>>& chains) {
  ConvergenceStat stat;
  stat.parameter = std::move(name);
  std::vector<std::span<const double>> halves;
  const std::size_t half = chains.front().size() / 2;
  for (const auto& c : chains) {
    halves.emplace_back(c.data(), half);
    halves.emplace_back(c.data() + (c.size() - half), half);
  }
  const double hn = static_cast<double>(half);
  std::vector<double> means, vars;
  for (auto h : halves) {
    const double mu = mean_of(h);
    double ss = 0.0;
    for (double v : h) ss += (v - mu) * (v - mu);
    means.push_back(mu);
    vars.push_back(ss / (hn - 1.0));
  }
  const double within = mean_of(vars);
  const double grand = mean_of(means);
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= hn / (static_cast<double>(means.size()) - 1.0);

  double total_ess = 0.0;
  for (const auto& c : chains) {
    const std::size_t n = c.size();
    const double mu = mean_of(c);
    double c0 = 0.0;
    for (double v : c) c0 += (v - mu) * (v - mu);
    c0 /= static_cast<double>(n);
    if (c0 == 0.0) {
      total_ess += static_cast<double>(n);
      continue;
    }
    const auto rho = [&](std::size_t k) {
      double s = 0.0;
      for (std::size_t t = 0; t + k < n; ++t) s += (c[t] - mu) * (c[t + k] - mu);
      return s / (static_cast<double>(n) * c0);
    };
    // Geyer initial monotone positive sequence over lag pairs.
    double tau = 1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k + 1 < n; k += 2) {
      double pair = rho(k) + rho(k + 1);
      if (pair <= 0.0) break;
      pair = std::min(pair, prev_pair);
      tau += 2.0 * pair;
      prev_pair = pair;
    }
    total_ess += std::min(static_cast<double>(n), static_cast<double>(n) / tau);
  }
  stat.ess = total_ess;

  if (within == 0.0) {
    stat.zero_variance = true;
    stat.rhat = 1.0;
    return stat;
  }
  const double vhat = (hn - 1.0) / hn * within + between / hn;
  stat.rhat = std::sqrt(vhat / within);
  return stat;
}

}  // namespace detail

// Split-half R-hat and autocorrelation-based effective sample size for every
// parameter, across one or more chains of identical shape.
inline std::vector<ConvergenceStat> convergence_stats(std::span<const FitResult> fits) {
  if (fits.empty()) throw std::invalid_argument("convergence_stats: no chains");
  for (const auto& f : fits) {
    if (f.chain.size() < 20)
      throw std::invalid_argument("convergence_stats: chain shorter than 20 draws");
    if (f.m != fits.front().m || f.v != fits.front().v)
      throw std::invalid_argument("convergence_stats: chains have mismatched dims");
  }
  const FitResult& first = fits.front();
  std::vector<ConvergenceStat> out;

  const auto run = [&](const std::string& name, auto getter) {
    std::vector<std::vector<double>> chains;
    for (const auto& f : fits) {
      std::vector<double> c;
      c.reserve(f.chain.size());
      for (const auto& d : f.chain) c.push_back(getter(d));
      chains.push_back(std::move(c));
    }
    out.push_back(detail::convergence_of(name, chains));
  };

  for (Index i = 0; i < first.m; ++i)
    for (Index j = 0; j < first.m; ++j)
      run("B1[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]",
          [i, j](const CoefficientSet& d) { return d.b1(i, j); });
  for (Index i = 0; i < first.m; ++i)
    for (Index j = 0; j < first.m; ++j)
      run("B2[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]",
          [i, j](const CoefficientSet& d) { return d.b2(i, j); });
  for (Index u = 0; u < first.v; ++u)
    for (Index w = 0; w < 3 * first.v; ++w)
      run("B3[" + std::to_string(u + 1) + "][" + std::to_string(w + 1) + "]",
          [u, w](const CoefficientSet& d) { return d.b3(u, w); });
  run("sigma2", [](const CoefficientSet& d) { return d.sigma2; });
  return out;
}

// Per-variable m x m grid of dyad RMSE values; the diagonal carries NaN and
// is exported as an empty cell.
struct RmseSurface {
  Index m = 0;
  std::vector<std::string> actors;
  std::vector<std::string> variables;
  std::vector<Matrix> grid;  // one m x m matrix per variable
};

inline RmseSurface rmse_surface(const std::vector<DyadRmse>& table, Index m, Index v,
                                std::vector<std::string> actors = {},
                                std::vector<std::string> variables = {}) {
  RmseSurface surf;
  surf.m = m;
  surf.actors = actors.empty() ? default_labels("a", m) : std::move(actors);
  surf.variables = variables.empty() ? default_labels("v", v) : std::move(variables);
  surf.grid.assign(static_cast<std::size_t>(v),
                   Matrix::Constant(m, m, std::numeric_limits<double>::quiet_NaN()));
  for (const auto& row : table) {
    if (row.i < 1 || row.i > m || row.j < 1 || row.j > m || row.w < 1 || row.w > v)
      throw std::invalid_argument("rmse_surface: table entry out of range");
    surf.grid[static_cast<std::size_t>(row.w - 1)](row.i - 1, row.j - 1) = row.rmse;
  }
  return surf;
}

// ---- exports ----

inline const char* b3_block_name(Index w, Index v) {
  if (w < v) return "direct";
  if (w < 2 * v) return "reciprocal";
  return "transitive";
}

inline void write_b3_summary_csv(const std::string& path, const FitResult& fit) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_b3_summary_csv: cannot open " + path);
  out << "parameter,block,variable,predictor,mean,sd,q0.5,q2.5,q5,q50,q95,q97.5,q99.5,"
         "sig90,sig95,sig99\n";
  for (Index u = 0; u < fit.v; ++u)
    for (Index w = 0; w < 3 * fit.v; ++w) {
      const auto s = summarize_scalar(
          "B3[" + std::to_string(u + 1) + "][" + std::to_string(w + 1) + "]",
          detail::extract_b3(fit, u, w));
      out << s.parameter << ',' << b3_block_name(w, fit.v) << ','
          << detail::variable_label(fit, u) << ','
          << detail::variable_label(fit, w % fit.v) << ','
          << format_double(s.mean, "%.12g") << ',' << format_double(s.sd, "%.12g") << ','
          << format_double(s.q005, "%.12g") << ',' << format_double(s.q025, "%.12g") << ','
          << format_double(s.q05, "%.12g") << ',' << format_double(s.q50, "%.12g") << ','
          << format_double(s.q95, "%.12g") << ',' << format_double(s.q975, "%.12g") << ','
          << format_double(s.q995, "%.12g") << ',' << (s.sig90 ? 1 : 0) << ','
          << (s.sig95 ? 1 : 0) << ',' << (s.sig99 ? 1 : 0) << '\n';
    }
}

inline void write_edges_csv(const std::string& path, const FitResult& fit,
                            const std::vector<Edge>& edges) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_edges_csv: cannot open " + path);
  out << "source,target,mean,lo,hi\n";
  for (const auto& e : edges)
    out << detail::actor_label(fit, e.source - 1) << ','
        << detail::actor_label(fit, e.target - 1) << ','
        << format_double(e.mean, "%.12g") << ',' << format_double(e.lo, "%.12g") << ','
        << format_double(e.hi, "%.12g") << '\n';
}

inline void write_diagonal_csv(const std::string& path, const FitResult& fit,
                               const std::vector<DiagonalEntry>& diag) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_diagonal_csv: cannot open " + path);
  out << "actor,mean,lo,hi,significant\n";
  for (const auto& d : diag)
    out << detail::actor_label(fit, d.actor - 1) << ',' << format_double(d.mean, "%.12g")
        << ',' << format_double(d.lo, "%.12g") << ',' << format_double(d.hi, "%.12g") << ','
        << (d.significant ? 1 : 0) << '\n';
}

// Post burn-in trace of the B3 entries and sigma2; iteration numbers are
// absolute sampler iterations.
inline void write_trace_csv(const std::string& path, const FitResult& fit) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
  out << "iteration,parameter,value\n";
  for (std::size_t k = 0; k < fit.chain.size(); ++k) {
    const int iter = fit.spec.burn_in + static_cast<int>(k) + 1;
    const auto& d = fit.chain[k];
    for (Index u = 0; u < fit.v; ++u)
      for (Index w = 0; w < 3 * fit.v; ++w)
        out << iter << ",B3[" << (u + 1) << "][" << (w + 1) << "],"
            << format_double(d.b3(u, w), "%.12g") << '\n';
    out << iter << ",sigma2," << format_double(d.sigma2, "%.12g") << '\n';
  }
}

inline void write_convergence_csv(const std::string& path,
                                  const std::vector<ConvergenceStat>& stats) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_convergence_csv: cannot open " + path);
  out << "parameter,rhat,ess,zero_variance\n";
  for (const auto& s : stats)
    out << s.parameter << ',' << format_double(s.rhat, "%.12g") << ','
        << format_double(s.ess, "%.12g") << ',' << (s.zero_variance ? 1 : 0) << '\n';
}

inline void write_rmse_grid_csv(const std::string& path, const RmseSurface& surf, Index w) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_rmse_grid_csv: cannot open " + path);
  out << "sender";
  for (const auto& a : surf.actors) out << ',' << a;
  out << '\n';
  const Matrix& g = surf.grid.at(static_cast<std::size_t>(w));
  for (Index i = 0; i < surf.m; ++i) {
    out << surf.actors[static_cast<std::size_t>(i)];
    for (Index j = 0; j < surf.m; ++j) {
      out << ',';
      if (!std::isnan(g(i, j))) out << format_double(g(i, j), "%.12g");
    }
    out << '\n';
  }
}

inline void write_rmse_grid_json(const std::string& path, const RmseSurface& surf) {
  nlohmann::json doc;
  doc["actors"] = surf.actors;
  doc["variables"] = surf.variables;
  auto& grids = doc["rmse"] = nlohmann::json::object();
  for (std::size_t w = 0; w < surf.grid.size(); ++w) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < surf.m; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Index j = 0; j < surf.m; ++j) {
        const double val = surf.grid[w](i, j);
        if (std::isnan(val))
          row.push_back(nullptr);
        else
          row.push_back(val);
      }
      rows.push_back(std::move(row));
    }
    grids[surf.variables[w]] = std::move(rows);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_rmse_grid_json: cannot open " + path);
  out << doc.dump(2) << '\n';
}

inline void write_rmse_long_csv(const std::string& path, const std::vector<DyadRmse>& table,
                                const std::vector<std::string>& actors,
                                const std::vector<std::string>& variables) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_rmse_long_csv: cannot open " + path);
  out << "sender,receiver,variable,rmse\n";
  for (const auto& r : table) {
    const auto label = [](const std::vector<std::string>& v, Index k, const char* pre) {
      return static_cast<std::size_t>(k - 1) < v.size() ? v[static_cast<std::size_t>(k - 1)]
                                                        : pre + std::to_string(k);
    };
    out << label(actors, r.i, "a") << ',' << label(actors, r.j, "a") << ','
        << label(variables, r.w, "v") << ',' << format_double(r.rmse, "%.12g") << '\n';
  }
}

}  // namespace mltr
