// Turns a raw relational panel into the response tensor and the
// lag-augmented design tensor with direct, reciprocal and transitive slices.
#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mltr/math.hpp"
#include "mltr/tensor.hpp"

namespace mltr {

// Observed dyadic panel y[i,j,w,t] with actor/variable/period labels.
// Self-dyads are structural: the diagonal is exactly zero at every slice.
struct RelationalSeries {
  std::vector<std::string> actors;
  std::vector<std::string> variables;
  std::vector<std::string> periods;
  Tensor4 data;  // m x m x v x n

  Index m() const { return data.dim(1); }
  Index v() const { return data.dim(3); }
  Index n() const { return data.dim(4); }

  void validate() const {
    const auto& d = data.dims();
    if (d[0] != d[1]) throw std::invalid_argument("RelationalSeries: actor modes differ");
    if (d[0] < 3) throw std::invalid_argument("RelationalSeries: need at least 3 actors");
    if (d[2] < 1) throw std::invalid_argument("RelationalSeries: need at least 1 variable");
    if (d[3] < 2) throw std::invalid_argument("RelationalSeries: need at least 2 periods");
    if (static_cast<Index>(actors.size()) != d[0])
      throw std::invalid_argument("RelationalSeries: actor labels do not match dims");
    if (static_cast<Index>(variables.size()) != d[2])
      throw std::invalid_argument("RelationalSeries: variable labels do not match dims");
    if (static_cast<Index>(periods.size()) != d[3])
      throw std::invalid_argument("RelationalSeries: period labels do not match dims");
    for (Index t = 0; t < d[3]; ++t)
      for (Index w = 0; w < d[2]; ++w)
        for (Index i = 0; i < d[0]; ++i)
          if (data(i, i, w, t) != 0.0)
            throw std::invalid_argument("RelationalSeries: nonzero self-dyad at actor " +
                                        std::to_string(i + 1));
  }
};

inline std::vector<std::string> default_labels(const char* prefix, Index count) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  int width = 1;
  for (Index c = count; c >= 10; c /= 10) ++width;
  for (Index k = 1; k <= count; ++k) {
    std::string num = std::to_string(k);
    out.push_back(prefix + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num);
  }
  return out;
}

// Subtracts the time mean from every (sender, receiver, variable) triplet.
inline RelationalSeries demean(const RelationalSeries& series) {
  series.validate();
  RelationalSeries out = series;
  const Index m = series.m(), v = series.v(), n = series.n();
  for (Index w = 0; w < v; ++w)
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < m; ++i) {
        if (i == j) continue;
        double mean = 0.0;
        for (Index t = 0; t < n; ++t) mean += series.data(i, j, w, t);
        mean /= static_cast<double>(n);
        for (Index t = 0; t < n; ++t) out.data(i, j, w, t) -= mean;
      }
  return out;
}

// 1-based ranks with average-rank tie handling.
inline std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t k = 0;
  while (k < n) {
    std::size_t j = k;
    while (j + 1 < n && x[order[j + 1]] == x[order[k]]) ++j;
    const double avg = 0.5 * static_cast<double>(k + j) + 1.0;
    for (std::size_t q = k; q <= j; ++q) ranks[order[q]] = avg;
    k = j + 1;
  }
  return ranks;
}

namespace detail {

// Normal quantile-quantile transform of one series: value with rank r maps
// to the standard normal quantile at (r - 0.5)/n, then the scores are
// centered and scaled to unit sample standard deviation. A zero-variance
// series maps to all zeros.
inline void qq_transform_inplace(std::span<double> x) {
  const std::size_t n = x.size();
  const bool constant = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
  if (constant) {
    std::fill(x.begin(), x.end(), 0.0);
    return;
  }
  const std::vector<double> ranks = average_ranks(x);
  for (std::size_t k = 0; k < n; ++k)
    x[k] = norm_quantile((ranks[k] - 0.5) / static_cast<double>(n));
  const double mu = mean_of(x);
  for (double& v : x) v -= mu;
  const double sd = sample_sd(x);
  if (sd > 0.0)
    for (double& v : x) v /= sd;
  else
    std::fill(x.begin(), x.end(), 0.0);  // total ties can collapse the scores
}

inline void center_scale_inplace(std::span<double> x) {
  const double mu = mean_of(x);
  for (double& v : x) v -= mu;
  const double sd = sample_sd(x);
  if (sd > 0.0)
    for (double& v : x) v /= sd;
  else
    std::fill(x.begin(), x.end(), 0.0);
}

}  // namespace detail

// Normal quantile-quantile transformation applied to every off-diagonal
// sender-receiver-variable triplet, followed by centering and scaling.
inline RelationalSeries qq_normalize(const RelationalSeries& series) {
  series.validate();
  RelationalSeries out = series;
  const Index m = series.m(), v = series.v(), n = series.n();
  std::vector<double> buf(static_cast<std::size_t>(n));
  for (Index w = 0; w < v; ++w)
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < m; ++i) {
        if (i == j) continue;
        for (Index t = 0; t < n; ++t) buf[static_cast<std::size_t>(t)] = series.data(i, j, w, t);
        detail::qq_transform_inplace(buf);
        for (Index t = 0; t < n; ++t) out.data(i, j, w, t) = buf[static_cast<std::size_t>(t)];
      }
  return out;
}

// Third-order (shared partner) statistic of one variable slice:
// T[i,i'] = sum_k (y[i,k] + y[k,i]) (y[i',k] + y[k,i']), i.e. the square of
// the symmetrized matrix, with the self-dyad diagonal zeroed afterwards.
// Plain ascending-k loops keep the summation order reproducible.
inline Matrix transitivity_slice(const Matrix& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("transitivity_slice: matrix must be square");
  const Index dim = m.rows();
  Matrix s = m + m.transpose();
  Matrix t = Matrix::Zero(dim, dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < dim; ++i) {
      if (i == j) continue;
      double acc = 0.0;
      for (Index k = 0; k < dim; ++k) acc += s(i, k) * s(j, k);
      t(i, j) = acc;
    }
  return t;
}

// Lag-augmented design: slices [0,v) carry the lagged panel, [v,2v) the
// dyadic transpose of the lag, [2v,3v) the transitivity statistic of the
// lag. The first period has no lag and is dropped from the aligned response.
struct DesignTensor {
  Tensor4 data;      // m x m x 3v x (n-1)
  Tensor4 response;  // m x m x v x (n-1)
  std::vector<std::string> slice_blocks;
  std::vector<std::string> actors;
  std::vector<std::string> variables;
  std::vector<std::string> periods;  // labels of the aligned response periods

  Index m() const { return data.dim(1); }
  Index v() const { return response.dim(3); }
  Index horizon() const { return data.dim(4); }
};

struct DesignOptions {
  // Center and scale each transitive triplet series after construction so
  // its coefficients are comparable with the direct/reciprocal blocks.
  // Off by default: the raw statistic is the documented definition.
  bool standardize_transitive = false;
};

inline DesignTensor build_design(const RelationalSeries& series, DesignOptions options = {}) {
  series.validate();
  const Index m = series.m(), v = series.v(), n = series.n();
  DesignTensor out;
  out.data = Tensor4(m, m, 3 * v, n - 1);
  out.response = Tensor4(m, m, v, n - 1);
  out.actors = series.actors;
  out.variables = series.variables;
  out.periods.assign(series.periods.begin() + 1, series.periods.end());
  for (Index w = 0; w < v; ++w) {
    out.slice_blocks.push_back("direct:" + series.variables[static_cast<std::size_t>(w)]);
  }
  for (Index w = 0; w < v; ++w)
    out.slice_blocks.push_back("reciprocal:" + series.variables[static_cast<std::size_t>(w)]);
  for (Index w = 0; w < v; ++w)
    out.slice_blocks.push_back("transitive:" + series.variables[static_cast<std::size_t>(w)]);

  Matrix lag(m, m);
  for (Index s = 0; s < n - 1; ++s)
    for (Index w = 0; w < v; ++w) {
      for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < m; ++i) {
          lag(i, j) = series.data(i, j, w, s);
          out.data(i, j, w, s) = series.data(i, j, w, s);
          out.data(i, j, v + w, s) = series.data(j, i, w, s);
          out.response(i, j, w, s) = series.data(i, j, w, s + 1);
        }
      const Matrix trans = transitivity_slice(lag);
      for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < m; ++i) out.data(i, j, 2 * v + w, s) = trans(i, j);
    }

  if (options.standardize_transitive) {
    std::vector<double> buf(static_cast<std::size_t>(n - 1));
    for (Index w = 0; w < v; ++w)
      for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < m; ++i) {
          if (i == j) continue;
          for (Index s = 0; s < n - 1; ++s)
            buf[static_cast<std::size_t>(s)] = out.data(i, j, 2 * v + w, s);
          detail::center_scale_inplace(buf);
          for (Index s = 0; s < n - 1; ++s)
            out.data(i, j, 2 * v + w, s) = buf[static_cast<std::size_t>(s)];
        }
  }
  return out;
}

}  // namespace mltr
