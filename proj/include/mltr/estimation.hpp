// Fits the multilinear autoregression Y = X x {B1,B2,B3} + E by block
// coordinate least squares and by Gibbs sampling with semi-conjugate priors.
//
// Self-dyad cells (i == j) are structural and excluded from every objective
// and likelihood. The exclusion is exact: the row regressions for B1/B2 and
// the slice regression for B3 subtract the Gram contribution of the excluded
// columns, and the excluded response cells are zero so the cross terms need
// no correction.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mltr/design.hpp"
#include "mltr/rng.hpp"
#include "mltr/tensor.hpp"

namespace mltr {

struct ModelSpec {
  int iterations = 8000;
  int burn_in = 1000;
  std::uint64_t seed = 1;
  double tau2 = 10.0;          // prior variance of every coefficient entry
  double sigma2_shape = 2.0;   // inverse-gamma prior on the error variance
  double sigma2_scale = 1.0;
  double als_tolerance = 1e-9;  // relative RSS decrease per sweep
  int als_max_sweeps = 100;

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("ModelSpec: iterations must be positive");
    if (burn_in < 0 || burn_in >= iterations)
      throw std::invalid_argument("ModelSpec: burn_in must be in [0, iterations)");
    if (!(tau2 > 0.0)) throw std::invalid_argument("ModelSpec: tau2 must be positive");
    if (!(sigma2_shape > 0.0) || !(sigma2_scale > 0.0))
      throw std::invalid_argument("ModelSpec: inverse-gamma parameters must be positive");
    if (!(als_tolerance >= 0.0)) throw std::invalid_argument("ModelSpec: negative ALS tolerance");
    if (als_max_sweeps < 1) throw std::invalid_argument("ModelSpec: als_max_sweeps must be positive");
  }
};

// One draw or point estimate of all model parameters.
struct CoefficientSet {
  Matrix b1;  // m x m sender coefficients
  Matrix b2;  // m x m receiver coefficients
  Matrix b3;  // v x 3v variable coefficients over direct/reciprocal/transitive
  double sigma2 = 1.0;
};

// Rescales B1 and B2 to Frobenius norm sqrt(m) and flips signs until both
// traces are nonnegative, absorbing every removed factor into B3. Fitted
// values are unchanged; scales already within a few ulps of one are left
// untouched so the map is exactly idempotent.
inline CoefficientSet normalize_identifiability(const CoefficientSet& c) {
  if (c.b1.rows() != c.b1.cols() || c.b2.rows() != c.b2.cols())
    throw std::invalid_argument("normalize_identifiability: B1 and B2 must be square");
  const double f1 = c.b1.norm();
  const double f2 = c.b2.norm();
  if (f1 == 0.0 || f2 == 0.0)
    throw std::invalid_argument("normalize_identifiability: zero coefficient matrix");
  CoefficientSet out = c;
  double absorbed = 1.0;
  const double s1 = f1 / std::sqrt(static_cast<double>(c.b1.rows()));
  if (std::abs(s1 - 1.0) > 4e-16) {
    out.b1 /= s1;
    absorbed *= s1;
  }
  const double s2 = f2 / std::sqrt(static_cast<double>(c.b2.rows()));
  if (std::abs(s2 - 1.0) > 4e-16) {
    out.b2 /= s2;
    absorbed *= s2;
  }
  if (out.b1.trace() < 0.0) {
    out.b1 = -out.b1;
    absorbed = -absorbed;
  }
  if (out.b2.trace() < 0.0) {
    out.b2 = -out.b2;
    absorbed = -absorbed;
  }
  if (absorbed != 1.0) out.b3 *= absorbed;
  return out;
}

struct AlsFit {
  CoefficientSet coef;  // normalized when B1, B2 are nonzero
  int sweeps = 0;
  std::vector<double> rss_history;  // index 0 is the pre-sweep objective
  bool rank_deficient = false;      // a minimum-norm fallback was taken
};

struct FitResult {
  std::vector<CoefficientSet> chain;  // post burn-in draws, each normalized
  CoefficientSet als_start;
  ModelSpec spec;
  Index m = 0, v = 0, horizon = 0;
  bool rank_deficient_start = false;
  std::vector<std::string> actors;     // optional labels for exports
  std::vector<std::string> variables;
};

namespace detail {

inline void check_fit_shapes(const Tensor4& y, const DesignTensor& x) {
  const auto& dy = y.dims();
  const auto& dx = x.data.dims();
  if (dy[0] != dy[1] || dx[0] != dx[1] || dy[0] != dx[0])
    throw std::invalid_argument("fit: actor modes of response and design disagree");
  if (dx[2] != 3 * dy[2])
    throw std::invalid_argument("fit: design must carry 3v slices for v response variables");
  if (dy[3] != dx[3])
    throw std::invalid_argument("fit: response and design horizons disagree");
  if (dy[3] < 1) throw std::invalid_argument("fit: empty horizon");
  for (double val : y.values())
    if (!std::isfinite(val)) throw std::invalid_argument("fit: non-finite response entry");
  for (double val : x.data.values())
    if (!std::isfinite(val)) throw std::invalid_argument("fit: non-finite design entry");
}

// Residual sum of squares over off-diagonal dyad cells.
inline double masked_rss(const Tensor4& y, const Tensor4& yhat) {
  const auto& d = y.dims();
  double rss = 0.0;
  const double* py = y.data();
  const double* ph = yhat.data();
  std::size_t idx = 0;
  for (Index t = 0; t < d[3]; ++t)
    for (Index w = 0; w < d[2]; ++w)
      for (Index j = 0; j < d[1]; ++j)
        for (Index i = 0; i < d[0]; ++i, ++idx) {
          if (i == j) continue;
          const double r = py[idx] - ph[idx];
          rss += r * r;
        }
  return rss;
}

// Work buffers reused across sweeps/iterations so the hot loop does not
// allocate.
struct SweepWork {
  Tensor4 xt_v;    // m x m x v x T, partial transform for the B1/B2 updates
  Tensor4 tmp_v;   // m x m x v x T
  Tensor4 tmp_3v;  // m x m x 3v x T, X x1 B1
  Tensor4 xt_3v;   // m x m x 3v x T, X x1 B1 x2 B2
  Tensor4 yhat;    // m x m x v x T
  Matrix gram1, cross1, excl1;  // mode-1 machinery
  Matrix gram2, cross2, excl2;
  Matrix gram3, cross3, excl3;
  Matrix rowsys;
  Vector rhs, beta, noise;

  SweepWork(Index m, Index v, Index horizon)
      : xt_v(m, m, v, horizon),
        tmp_v(m, m, v, horizon),
        tmp_3v(m, m, 3 * v, horizon),
        xt_3v(m, m, 3 * v, horizon),
        yhat(m, m, v, horizon),
        gram1(m, m), cross1(m, m), excl1(m, v * horizon),
        gram2(m, m), cross2(m, m), excl2(m, v * horizon),
        gram3(3 * v, 3 * v), cross3(3 * v, v), excl3(3 * v, m * horizon),
        rowsys(m, m), rhs(m), beta(m), noise(m) {}
};

// --- mode-1: rows of B1 regress Y[i,:,:,:] on (X x2 B2 x3 B3)[.,:, :, :] ---

inline void transform_for_mode1(const Tensor4& x, const Matrix& b2, const Matrix& b3,
                                SweepWork& w) {
  mode3_product_into(w.tmp_v, x, b3);
  mode2_product_into(w.xt_v, w.tmp_v, b2);
}

inline void gram_cross_mode1(const Tensor4& xt, const Tensor4& y, SweepWork& w) {
  const auto& d = xt.dims();
  Eigen::Map<const Matrix> x1(xt.data(), d[0], d[1] * d[2] * d[3]);
  Eigen::Map<const Matrix> y1(y.data(), d[0], d[1] * d[2] * d[3]);
  w.gram1.noalias() = x1 * x1.transpose();
  w.cross1.noalias() = x1 * y1.transpose();
}

// Gram contribution of the excluded (receiver == i) columns.
inline void exclusion_mode1(const Tensor4& xt, Index i, SweepWork& w, Matrix& out) {
  const auto& d = xt.dims();
  Index c = 0;
  for (Index t = 0; t < d[3]; ++t)
    for (Index u = 0; u < d[2]; ++u, ++c)
      w.excl1.col(c) = Eigen::Map<const Vector>(
          xt.data() + xt.offset(0, i, u, t), d[0]);
  out.noalias() = w.excl1 * w.excl1.transpose();
}

// --- mode-2: rows of B2 regress Y[:,j,:,:] on (X x1 B1 x3 B3) ---

inline void transform_for_mode2(const Tensor4& x, const Matrix& b1, const Matrix& b3,
                                SweepWork& w) {
  mode1_product_into(w.tmp_3v, x, b1);
  mode3_product_into(w.xt_v, w.tmp_3v, b3);
}

inline void gram_cross_mode2(const Tensor4& xt, const Tensor4& y, SweepWork& w) {
  const auto& d = xt.dims();
  w.gram2.setZero();
  w.cross2.setZero();
  for (Index t = 0; t < d[3]; ++t)
    for (Index u = 0; u < d[2]; ++u) {
      auto xs = slab(xt, u, t);
      auto ys = slab(y, u, t);
      w.gram2.noalias() += xs.transpose() * xs;
      w.cross2.noalias() += xs.transpose() * ys;
    }
}

inline void exclusion_mode2(const Tensor4& xt, Index j, SweepWork& w, Matrix& out) {
  const auto& d = xt.dims();
  Index c = 0;
  for (Index t = 0; t < d[3]; ++t)
    for (Index u = 0; u < d[2]; ++u, ++c)
      w.excl2.col(c) = slab(xt, u, t).row(j).transpose();
  out.noalias() = w.excl2 * w.excl2.transpose();
}

// --- mode-3: rows of B3 regress Y[:,:,u,:] on (X x1 B1 x2 B2) ---

inline void transform_for_mode3(const Tensor4& x, const Matrix& b1, const Matrix& b2,
                                SweepWork& w) {
  mode1_product_into(w.tmp_3v, x, b1);
  mode2_product_into(w.xt_3v, w.tmp_3v, b2);
}

// Gram and cross over included columns; all B3 rows share the same design,
// so a single diagonal-column correction applies.
inline void gram_cross_mode3(const Tensor4& xt, const Tensor4& y, SweepWork& w) {
  const auto& d = xt.dims();
  const Index m = d[0];
  w.gram3.setZero();
  w.cross3.setZero();
  for (Index t = 0; t < d[3]; ++t) {
    auto xb = time_block(xt, t);
    auto yb = time_block(y, t);
    w.gram3.noalias() += xb.transpose() * xb;
    w.cross3.noalias() += xb.transpose() * yb;
  }
  Index c = 0;
  for (Index t = 0; t < d[3]; ++t)
    for (Index i = 0; i < m; ++i, ++c)
      w.excl3.col(c) = Eigen::Map<const Vector, 0, Eigen::InnerStride<>>(
          xt.data() + xt.offset(i, i, 0, t), d[2], Eigen::InnerStride<>(m * m));
  w.gram3.noalias() -= w.excl3 * w.excl3.transpose();
}

// Least-squares solve of a PSD normal system. A rank-deficient (or otherwise
// unusable) factorization falls back to the minimum-norm solution through an
// eigendecomposition and raises the caller's warning flag.
inline Vector solve_normal_equations(const Matrix& gram, const Vector& rhs, bool* degraded) {
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() == Eigen::Success) {
    const Vector d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (dmax > 0.0 && d.minCoeff() > dmax * 1e-12) {
      Vector x = ldlt.solve(rhs);
      if (x.allFinite()) return x;
    }
  }
  if (degraded) *degraded = true;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  const auto& vals = es.eigenvalues();
  const double cutoff = vals.cwiseAbs().maxCoeff() *
                        static_cast<double>(gram.rows()) *
                        std::numeric_limits<double>::epsilon();
  Vector inv = Vector::Zero(gram.rows());
  for (Index k = 0; k < gram.rows(); ++k)
    if (vals[k] > cutoff) inv[k] = 1.0 / vals[k];
  return es.eigenvectors() * (inv.asDiagonal() * (es.eigenvectors().transpose() * rhs));
}

constexpr double kSigma2Floor = 1e-300;
constexpr double kJitterRidge = 1e-10;
constexpr int kJitterRetries = 3;

// Draw from N(prec^-1 rhs, prec^-1). The noise vector must be pre-filled
// with standard normals.
inline Vector sample_gaussian_row(Matrix prec, const Vector& rhs, const Vector& noise,
                                  const char* where) {
  for (int attempt = 0; attempt <= kJitterRetries; ++attempt) {
    Eigen::LLT<Matrix> llt(prec);
    if (llt.info() == Eigen::Success) {
      Vector mean = llt.solve(rhs);
      Vector draw = mean + llt.matrixU().solve(noise);
      if (draw.allFinite()) return draw;
    }
    prec.diagonal().array() += kJitterRidge;
  }
  throw std::runtime_error(std::string("gibbs_fit: conditional covariance factorization failed after ") +
                           std::to_string(kJitterRetries) + " jitter retries (" + where + ")");
}

}  // namespace detail

// Block coordinate least squares in the fixed order B1, B2, B3. Stops when
// the relative RSS decrease over a full sweep drops below the tolerance or
// the sweep budget is exhausted. A sweep that fails to improve the objective
// (possible only from rounding at stagnation) is rolled back, which keeps
// the recorded objective non-increasing.
inline AlsFit als_fit(const Tensor4& y, const DesignTensor& x, const ModelSpec& spec) {
  spec.validate();
  detail::check_fit_shapes(y, x);
  const Index m = y.dim(1), v = y.dim(3), horizon = y.dim(4);
  const double n_included = static_cast<double>(m) * static_cast<double>(m - 1) *
                            static_cast<double>(v) * static_cast<double>(horizon);

  AlsFit fit;
  fit.coef.b1 = Matrix::Identity(m, m);
  fit.coef.b2 = Matrix::Identity(m, m);
  fit.coef.b3 = Matrix::Zero(v, 3 * v);
  fit.coef.b3.leftCols(v) = Matrix::Identity(v, v);

  detail::SweepWork w(m, v, horizon);
  Matrix correction(m, m);
  Matrix correction3(3 * v, 3 * v);

  detail::transform_for_mode3(x.data, fit.coef.b1, fit.coef.b2, w);
  detail::mode3_product_into(w.yhat, w.xt_3v, fit.coef.b3);
  double rss_prev = detail::masked_rss(y, w.yhat);
  fit.rss_history.push_back(rss_prev);

  for (int sweep = 1; sweep <= spec.als_max_sweeps; ++sweep) {
    const CoefficientSet before = fit.coef;

    detail::transform_for_mode1(x.data, fit.coef.b2, fit.coef.b3, w);
    detail::gram_cross_mode1(w.xt_v, y, w);
    for (Index i = 0; i < m; ++i) {
      detail::exclusion_mode1(w.xt_v, i, w, correction);
      w.rowsys = w.gram1 - correction;
      fit.coef.b1.row(i) =
          detail::solve_normal_equations(w.rowsys, w.cross1.col(i), &fit.rank_deficient)
              .transpose();
    }

    detail::transform_for_mode2(x.data, fit.coef.b1, fit.coef.b3, w);
    detail::gram_cross_mode2(w.xt_v, y, w);
    for (Index j = 0; j < m; ++j) {
      detail::exclusion_mode2(w.xt_v, j, w, correction);
      w.rowsys = w.gram2 - correction;
      fit.coef.b2.row(j) =
          detail::solve_normal_equations(w.rowsys, w.cross2.col(j), &fit.rank_deficient)
              .transpose();
    }

    detail::transform_for_mode3(x.data, fit.coef.b1, fit.coef.b2, w);
    detail::gram_cross_mode3(w.xt_3v, y, w);
    for (Index u = 0; u < v; ++u)
      fit.coef.b3.row(u) =
          detail::solve_normal_equations(w.gram3, w.cross3.col(u), &fit.rank_deficient)
              .transpose();

    detail::mode3_product_into(w.yhat, w.xt_3v, fit.coef.b3);
    const double rss = detail::masked_rss(y, w.yhat);
    if (rss > rss_prev) {
      fit.coef = before;  // rounding at stagnation; keep the better point
      break;
    }
    fit.rss_history.push_back(rss);
    fit.sweeps = sweep;
    const bool converged = (rss_prev - rss) <= spec.als_tolerance * std::max(rss_prev, 1e-300);
    rss_prev = rss;
    if (converged) break;
  }

  fit.coef.sigma2 = std::max(rss_prev / n_included, detail::kSigma2Floor);
  if (fit.coef.b1.norm() > 0.0 && fit.coef.b2.norm() > 0.0)
    fit.coef = normalize_identifiability(fit.coef);
  return fit;
}

// Gibbs sampler with entrywise N(0, tau2) priors on the coefficient matrices
// and an inverse-gamma(shape, scale) prior on sigma2. Starts from the least
// squares estimate; every stored draw is normalized. Deterministic for a
// fixed seed.
inline FitResult gibbs_fit(const Tensor4& y, const DesignTensor& x, const ModelSpec& spec) {
  spec.validate();
  detail::check_fit_shapes(y, x);
  const Index m = y.dim(1), v = y.dim(3), horizon = y.dim(4);
  const double n_included = static_cast<double>(m) * static_cast<double>(m - 1) *
                            static_cast<double>(v) * static_cast<double>(horizon);

  FitResult result;
  result.spec = spec;
  result.m = m;
  result.v = v;
  result.horizon = horizon;

  AlsFit start = als_fit(y, x, spec);
  result.als_start = start.coef;
  result.rank_deficient_start = start.rank_deficient;
  result.chain.reserve(static_cast<std::size_t>(spec.iterations - spec.burn_in));

  CoefficientSet state = start.coef;
  // Floor the starting variance: an exactly interpolating least-squares
  // start would otherwise put infinite precision on the first update.
  double sigma2 = std::max(state.sigma2, 1e-12);

  detail::SweepWork w(m, v, horizon);
  Matrix correction(m, m);
  Matrix prec(m, m);
  Matrix prec3(3 * v, 3 * v);
  Vector noise3(3 * v);
  Rng rng(spec.seed);

  const double prior_prec = 1.0 / spec.tau2;
  const double post_shape = spec.sigma2_shape + 0.5 * n_included;

  for (int iter = 1; iter <= spec.iterations; ++iter) {
    const double inv_s2 = 1.0 / sigma2;

    detail::transform_for_mode1(x.data, state.b2, state.b3, w);
    detail::gram_cross_mode1(w.xt_v, y, w);
    for (Index i = 0; i < m; ++i) {
      detail::exclusion_mode1(w.xt_v, i, w, correction);
      prec = (w.gram1 - correction) * inv_s2;
      prec.diagonal().array() += prior_prec;
      for (Index k = 0; k < m; ++k) w.noise[k] = rng.normal();
      state.b1.row(i) =
          detail::sample_gaussian_row(prec, w.cross1.col(i) * inv_s2, w.noise, "B1").transpose();
    }

    detail::transform_for_mode2(x.data, state.b1, state.b3, w);
    detail::gram_cross_mode2(w.xt_v, y, w);
    for (Index j = 0; j < m; ++j) {
      detail::exclusion_mode2(w.xt_v, j, w, correction);
      prec = (w.gram2 - correction) * inv_s2;
      prec.diagonal().array() += prior_prec;
      for (Index k = 0; k < m; ++k) w.noise[k] = rng.normal();
      state.b2.row(j) =
          detail::sample_gaussian_row(prec, w.cross2.col(j) * inv_s2, w.noise, "B2").transpose();
    }

    detail::transform_for_mode3(x.data, state.b1, state.b2, w);
    detail::gram_cross_mode3(w.xt_3v, y, w);
    prec3 = w.gram3 * inv_s2;
    prec3.diagonal().array() += prior_prec;
    for (Index u = 0; u < v; ++u) {
      for (Index k = 0; k < 3 * v; ++k) noise3[k] = rng.normal();
      state.b3.row(u) =
          detail::sample_gaussian_row(prec3, w.cross3.col(u) * inv_s2, noise3, "B3").transpose();
    }

    detail::mode3_product_into(w.yhat, w.xt_3v, state.b3);
    const double rss = detail::masked_rss(y, w.yhat);
    sigma2 = std::max(rng.inverse_gamma(post_shape, spec.sigma2_scale + 0.5 * rss),
                      detail::kSigma2Floor);
    state.sigma2 = sigma2;

    if (iter > spec.burn_in) result.chain.push_back(normalize_identifiability(state));
  }
  return result;
}

// Forward map with the error set to zero; self-dyad cells are forced to 0.
inline Tensor4 predict(const DesignTensor& x, const CoefficientSet& c) {
  Tensor4 out = tucker_apply(x.data, c.b1, c.b2, c.b3);
  const auto& d = out.dims();
  for (Index t = 0; t < d[3]; ++t)
    for (Index w = 0; w < d[2]; ++w)
      for (Index i = 0; i < d[0]; ++i) out(i, i, w, t) = 0.0;
  return out;
}

struct DyadRmse {
  Index i, j, w;  // 1-based sender, receiver, variable
  double rmse;
};

// In-sample RMSE of every off-diagonal dyad time series; exactly m(m-1)
// values per variable, ordered by (variable, sender, receiver).
inline std::vector<DyadRmse> rmse_per_dyad(const Tensor4& y, const Tensor4& yhat) {
  if (!y.same_dims(yhat))
    throw std::invalid_argument("rmse_per_dyad: tensors must have identical dims");
  const auto& d = y.dims();
  std::vector<DyadRmse> out;
  out.reserve(static_cast<std::size_t>(d[2] * d[0] * (d[0] - 1)));
  for (Index w = 0; w < d[2]; ++w)
    for (Index i = 0; i < d[0]; ++i)
      for (Index j = 0; j < d[1]; ++j) {
        if (i == j) continue;
        double ss = 0.0;
        for (Index t = 0; t < d[3]; ++t) {
          const double r = y(i, j, w, t) - yhat(i, j, w, t);
          ss += r * r;
        }
        out.push_back({i + 1, j + 1, w + 1, std::sqrt(ss / static_cast<double>(d[3]))});
      }
  return out;
}

// Gaussian log-likelihood over the off-diagonal cells.
inline double log_likelihood(const Tensor4& y, const DesignTensor& x, const CoefficientSet& c) {
  const Tensor4 yhat = predict(x, c);
  const double rss = detail::masked_rss(y, yhat);
  const Index m = y.dim(1);
  const double n_included = static_cast<double>(m) * static_cast<double>(m - 1) *
                            static_cast<double>(y.dim(3)) * static_cast<double>(y.dim(4));
  constexpr double kLog2Pi = 1.8378770664093454836;
  return -0.5 * n_included * (kLog2Pi + std::log(c.sigma2)) - 0.5 * rss / c.sigma2;
}

// Entrywise posterior mean of the stored (normalized) draws.
inline CoefficientSet posterior_mean(const FitResult& fit) {
  if (fit.chain.empty()) throw std::invalid_argument("posterior_mean: empty chain");
  CoefficientSet out;
  out.b1 = Matrix::Zero(fit.m, fit.m);
  out.b2 = Matrix::Zero(fit.m, fit.m);
  out.b3 = Matrix::Zero(fit.v, 3 * fit.v);
  double s2 = 0.0;
  for (const auto& draw : fit.chain) {
    out.b1 += draw.b1;
    out.b2 += draw.b2;
    out.b3 += draw.b3;
    s2 += draw.sigma2;
  }
  const double k = static_cast<double>(fit.chain.size());
  out.b1 /= k;
  out.b2 /= k;
  out.b3 /= k;
  out.sigma2 = s2 / k;
  return out;
}

}  // namespace mltr
