#include <catch2/catch_amalgamated.hpp>

#include "mltr/estimation.hpp"
#include "mltr/ingest.hpp"
#include "oracles.hpp"

using mltr::CoefficientSet;
using mltr::DesignTensor;
using mltr::Index;
using mltr::Matrix;
using mltr::ModelSpec;
using mltr::Tensor4;

namespace {

// Stable, diagonally dominant truth for recovery experiments; B3 is rescaled
// so the linear part of the dynamics has spectral radius 0.7.
CoefficientSet planted_truth(Index m, Index v, std::uint64_t seed) {
  mltr::Rng rng(seed);
  CoefficientSet c;
  c.b1 = Matrix::Identity(m, m) + 0.1 * oracle::random_matrix(m, m, rng);
  c.b2 = Matrix::Identity(m, m) + 0.1 * oracle::random_matrix(m, m, rng);
  c.b3 = Matrix::Zero(v, 3 * v);
  for (Index u = 0; u < v; ++u) {
    for (Index w = 0; w < v; ++w) {
      c.b3(u, w) = (u == w) ? 0.45 - 0.05 * static_cast<double>(u) : 0.10;
      c.b3(u, v + w) = (u == w) ? 0.15 : 0.05;
      c.b3(u, 2 * v + w) = (u == w) ? 0.02 : 0.01;
    }
  }
  c.b3 *= 0.7 / mltr::linear_spectral_radius(c, m, v);
  c.sigma2 = 1.0;
  return c;
}

DesignTensor design_from_series(const mltr::RelationalSeries& s) {
  return mltr::build_design(s);
}

// Noiseless regression problem: the design comes from a pure-noise panel and
// the response is the exact Tucker image of it, so the optimum has RSS 0.
DesignTensor noiseless_problem(Index m, Index v, Index n, const CoefficientSet& truth,
                               std::uint64_t seed) {
  CoefficientSet null;
  null.b1 = Matrix::Identity(m, m);
  null.b2 = Matrix::Identity(m, m);
  null.b3 = Matrix::Zero(v, 3 * v);
  const auto panel = mltr::simulate_synthetic(m, v, n, null, 1.0, seed);
  DesignTensor d = mltr::build_design(panel);
  d.response = mltr::predict(d, truth);
  return d;
}

DesignTensor zero_design(Index m, Index v, Index horizon, std::uint64_t seed) {
  DesignTensor d;
  d.data = Tensor4(m, m, 3 * v, horizon);
  d.response = Tensor4(m, m, v, horizon);
  mltr::Rng rng(seed);
  for (Index t = 0; t < horizon; ++t)
    for (Index w = 0; w < v; ++w)
      for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < m; ++i)
          if (i != j) d.response(i, j, w, t) = rng.normal();
  return d;
}

double max_rel_err(const Matrix& got, const Matrix& truth) {
  return (got - truth).cwiseAbs().maxCoeff() / truth.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("normalize_identifiability is scale invariant") {
  mltr::Rng rng(3);
  CoefficientSet c;
  c.b1 = oracle::random_matrix(4, 4, rng);
  c.b2 = oracle::random_matrix(4, 4, rng);
  c.b3 = oracle::random_matrix(2, 6, rng);
  CoefficientSet scaled = c;
  scaled.b1 *= 2.0;
  scaled.b2 *= 3.0;
  scaled.b3 /= 6.0;
  const CoefficientSet na = mltr::normalize_identifiability(c);
  const CoefficientSet nb = mltr::normalize_identifiability(scaled);
  CHECK((na.b1 - nb.b1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((na.b2 - nb.b2).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((na.b3 - nb.b3).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(na.b1.norm() - 2.0) < 1e-12);  // sqrt(m) with m = 4
  CHECK(na.b1.trace() >= 0.0);
  CHECK(na.b2.trace() >= 0.0);
}

TEST_CASE("normalization leaves the Tucker map unchanged") {
  mltr::Rng rng(5);
  CoefficientSet c;
  c.b1 = oracle::random_matrix(3, 3, rng);
  c.b2 = oracle::random_matrix(3, 3, rng);
  c.b3 = oracle::random_matrix(2, 6, rng);
  const CoefficientSet n = mltr::normalize_identifiability(c);
  const Tensor4 x = oracle::random_tensor(3, 3, 6, 4, rng);
  const Tensor4 before = mltr::tucker_apply(x, c.b1, c.b2, c.b3);
  const Tensor4 after = mltr::tucker_apply(x, n.b1, n.b2, n.b3);
  for (std::size_t k = 0; k < before.values().size(); ++k)
    CHECK(std::abs(before.values()[k] - after.values()[k]) < 1e-12);
}

TEST_CASE("normalization resolves the sign ambiguity") {
  mltr::Rng rng(7);
  CoefficientSet c;
  c.b1 = Matrix::Identity(3, 3) + 0.1 * oracle::random_matrix(3, 3, rng);
  c.b2 = Matrix::Identity(3, 3) + 0.1 * oracle::random_matrix(3, 3, rng);
  c.b3 = oracle::random_matrix(1, 3, rng);
  CoefficientSet flipped = c;
  flipped.b1 = -flipped.b1;
  flipped.b2 = -flipped.b2;
  const CoefficientSet na = mltr::normalize_identifiability(c);
  const CoefficientSet nb = mltr::normalize_identifiability(flipped);
  CHECK((na.b1 - nb.b1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((na.b3 - nb.b3).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normalization is exactly idempotent") {
  mltr::Rng rng(9);
  CoefficientSet c;
  c.b1 = oracle::random_matrix(5, 5, rng);
  c.b2 = oracle::random_matrix(5, 5, rng);
  c.b3 = oracle::random_matrix(2, 6, rng);
  const CoefficientSet once = mltr::normalize_identifiability(c);
  const CoefficientSet twice = mltr::normalize_identifiability(once);
  CHECK(once.b1 == twice.b1);
  CHECK(once.b2 == twice.b2);
  CHECK(once.b3 == twice.b3);
}

TEST_CASE("normalization rejects zero matrices") {
  CoefficientSet c;
  c.b1 = Matrix::Zero(3, 3);
  c.b2 = Matrix::Identity(3, 3);
  c.b3 = Matrix::Zero(1, 3);
  CHECK_THROWS_AS(mltr::normalize_identifiability(c), std::invalid_argument);
}

TEST_CASE("als_fit recovers planted coefficients from noiseless data") {
  const Index m = 5, v = 2, n = 50;
  const CoefficientSet truth = planted_truth(m, v, 42);
  const DesignTensor design = noiseless_problem(m, v, n, truth, 99);

  ModelSpec spec;
  spec.als_tolerance = 1e-15;
  spec.als_max_sweeps = 500;
  const mltr::AlsFit fit = mltr::als_fit(design.response, design, spec);
  CHECK_FALSE(fit.rank_deficient);

  const CoefficientSet want = mltr::normalize_identifiability(truth);
  CHECK(max_rel_err(fit.coef.b1, want.b1) < 1e-6);
  CHECK(max_rel_err(fit.coef.b2, want.b2) < 1e-6);
  CHECK(max_rel_err(fit.coef.b3, want.b3) < 1e-6);
  CHECK(fit.coef.sigma2 < 1e-10);
}

TEST_CASE("als_fit on a zero response returns zero B3 and zero fit") {
  const auto series = mltr::simulate_synthetic(4, 1, 12, planted_truth(4, 1, 8), 0.3, 17);
  DesignTensor design = design_from_series(series);
  design.response = Tensor4(4, 4, 1, design.horizon());  // zero everything out

  const mltr::AlsFit fit = mltr::als_fit(design.response, design, ModelSpec{});
  CHECK(fit.coef.b3.cwiseAbs().maxCoeff() < 1e-12);
  const Tensor4 yhat = mltr::predict(design, fit.coef);
  for (double vv : yhat.values()) CHECK(std::abs(vv) < 1e-12);
}

TEST_CASE("als_fit objective is monotone non-increasing") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto series = mltr::simulate_synthetic(5, 2, 20, planted_truth(5, 2, seed), 0.5, seed);
    const DesignTensor design = design_from_series(series);
    ModelSpec spec;
    spec.als_max_sweeps = 40;
    const mltr::AlsFit fit = mltr::als_fit(design.response, design, spec);
    REQUIRE(fit.rss_history.size() >= 2);
    for (std::size_t k = 1; k < fit.rss_history.size(); ++k)
      CHECK(fit.rss_history[k] <= fit.rss_history[k - 1]);
  }
}

TEST_CASE("als_fit on an all-zero design takes the minimum-norm path") {
  const DesignTensor design = zero_design(4, 1, 10, 5);
  const mltr::AlsFit fit = mltr::als_fit(design.response, design, ModelSpec{});
  CHECK(fit.rank_deficient);
  CHECK(fit.coef.b3.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gibbs_fit with defaults yields 7000 stored draws") {
  const auto series = mltr::simulate_synthetic(3, 1, 6, planted_truth(3, 1, 2), 0.2, 4);
  const DesignTensor design = design_from_series(series);
  ModelSpec spec;  // 8000 iterations, 1000 burn-in
  spec.seed = 12;
  const mltr::FitResult fit = mltr::gibbs_fit(design.response, design, spec);
  CHECK(fit.chain.size() == 7000);
  // every stored draw satisfies the normalization convention
  for (std::size_t k = 0; k < fit.chain.size(); k += 997) {
    CHECK(std::abs(fit.chain[k].b1.norm() - std::sqrt(3.0)) < 1e-9);
    CHECK(fit.chain[k].b1.trace() >= 0.0);
    CHECK(fit.chain[k].sigma2 > 0.0);
  }
}

TEST_CASE("gibbs_fit is bit-reproducible for a fixed seed") {
  const auto series = mltr::simulate_synthetic(4, 1, 15, planted_truth(4, 1, 3), 0.3, 21);
  const DesignTensor design = design_from_series(series);
  ModelSpec spec;
  spec.iterations = 60;
  spec.burn_in = 10;
  spec.seed = 777;
  const mltr::FitResult a = mltr::gibbs_fit(design.response, design, spec);
  const mltr::FitResult b = mltr::gibbs_fit(design.response, design, spec);
  REQUIRE(a.chain.size() == b.chain.size());
  for (std::size_t k = 0; k < a.chain.size(); ++k) {
    CHECK(a.chain[k].b1 == b.chain[k].b1);
    CHECK(a.chain[k].b2 == b.chain[k].b2);
    CHECK(a.chain[k].b3 == b.chain[k].b3);
    CHECK(a.chain[k].sigma2 == b.chain[k].sigma2);
  }
  spec.seed = 778;
  const mltr::FitResult c = mltr::gibbs_fit(design.response, design, spec);
  CHECK(a.chain.front().b1 != c.chain.front().b1);
}

TEST_CASE("gibbs_fit under a null design centers B3 on zero") {
  const DesignTensor design = zero_design(4, 1, 12, 9);
  ModelSpec spec;
  spec.iterations = 3000;
  spec.burn_in = 500;
  spec.seed = 31;
  const mltr::FitResult fit = mltr::gibbs_fit(design.response, design, spec);
  // under X = 0 the stored draws are i.i.d., so a 3-standard-error band applies
  const double k = static_cast<double>(fit.chain.size());
  for (Index u = 0; u < fit.v; ++u)
    for (Index w = 0; w < 3 * fit.v; ++w) {
      std::vector<double> draws;
      for (const auto& d : fit.chain) draws.push_back(d.b3(u, w));
      const double mean = mltr::mean_of(draws);
      const double se = mltr::sample_sd(draws) / std::sqrt(k);
      CHECK(std::abs(mean) < 3.0 * se + 1e-12);
    }
}

TEST_CASE("gibbs_fit posterior covers planted B3 on synthetic data (smoke)") {
  const Index m = 6, v = 2, n = 80;
  const CoefficientSet truth = planted_truth(m, v, 11);
  const auto series = mltr::simulate_synthetic(m, v, n, truth, 0.1, 51);
  const DesignTensor design = design_from_series(series);
  ModelSpec spec;
  spec.iterations = 800;
  spec.burn_in = 200;
  spec.seed = 5;
  const mltr::FitResult fit = mltr::gibbs_fit(design.response, design, spec);
  const CoefficientSet want = mltr::normalize_identifiability(truth);
  for (Index u = 0; u < v; ++u)
    for (Index w = 0; w < 3 * v; ++w) {
      std::vector<double> draws;
      for (const auto& d : fit.chain) draws.push_back(d.b3(u, w));
      const double mean = mltr::mean_of(draws);
      const double sd = mltr::sample_sd(draws);
      CHECK(std::abs(mean - want.b3(u, w)) < 4.0 * sd + 0.02);
    }
}

TEST_CASE("posterior B3 spread shrinks as the sigma2 prior scale shrinks") {
  const Index m = 5, v = 1, n = 40;
  const CoefficientSet truth = planted_truth(m, v, 13);
  const DesignTensor design = noiseless_problem(m, v, n, truth, 77);
  ModelSpec wide;
  wide.iterations = 400;
  wide.burn_in = 100;
  wide.seed = 4;
  ModelSpec tight = wide;
  tight.sigma2_scale = 1e-8;
  const mltr::FitResult fw = mltr::gibbs_fit(design.response, design, wide);
  const mltr::FitResult ft = mltr::gibbs_fit(design.response, design, tight);
  for (Index u = 0; u < v; ++u)
    for (Index w = 0; w < 3 * v; ++w) {
      std::vector<double> dw, dt;
      for (const auto& d : fw.chain) dw.push_back(d.b3(u, w));
      for (const auto& d : ft.chain) dt.push_back(d.b3(u, w));
      CHECK(mltr::sample_sd(dt) < mltr::sample_sd(dw));
    }
}

TEST_CASE("log-likelihood is invariant under normalization") {
  const auto series = mltr::simulate_synthetic(4, 2, 15, planted_truth(4, 2, 6), 0.4, 33);
  const DesignTensor design = design_from_series(series);
  mltr::Rng rng(15);
  CoefficientSet c;
  c.b1 = oracle::random_matrix(4, 4, rng);
  c.b2 = oracle::random_matrix(4, 4, rng);
  c.b3 = oracle::random_matrix(2, 6, rng);
  c.sigma2 = 0.7;
  const double before = mltr::log_likelihood(design.response, design, c);
  const double after =
      mltr::log_likelihood(design.response, design, mltr::normalize_identifiability(c));
  CHECK(std::abs(before - after) < 1e-10);
}

TEST_CASE("predict forces the self-dyad diagonal to zero") {
  const auto series = mltr::simulate_synthetic(4, 1, 10, planted_truth(4, 1, 5), 0.3, 3);
  const DesignTensor design = design_from_series(series);

  CoefficientSet zero;
  zero.b1 = Matrix::Identity(4, 4);
  zero.b2 = Matrix::Identity(4, 4);
  zero.b3 = Matrix::Zero(1, 3);
  const Tensor4 nothing = mltr::predict(design, zero);
  for (double vv : nothing.values()) CHECK(vv == 0.0);

  // identity-like coefficients reproduce the direct lag slice off-diagonal
  CoefficientSet direct = zero;
  direct.b3(0, 0) = 1.0;
  const Tensor4 yhat = mltr::predict(design, direct);
  for (Index t = 0; t < design.horizon(); ++t)
    for (Index j = 0; j < 4; ++j)
      for (Index i = 0; i < 4; ++i) {
        if (i == j)
          CHECK(yhat(i, j, 0, t) == 0.0);
        else
          CHECK(yhat(i, j, 0, t) == design.data(i, j, 0, t));
      }

  // random small instance against the brute-force quadruple sum
  mltr::Rng rng(19);
  CoefficientSet c;
  c.b1 = oracle::random_matrix(4, 4, rng);
  c.b2 = oracle::random_matrix(4, 4, rng);
  c.b3 = oracle::random_matrix(1, 3, rng);
  const Tensor4 got = mltr::predict(design, c);
  const Tensor4 want = oracle::tucker_loop(design.data, c.b1, c.b2, c.b3);
  for (Index t = 0; t < design.horizon(); ++t)
    for (Index j = 0; j < 4; ++j)
      for (Index i = 0; i < 4; ++i)
        if (i != j) CHECK(std::abs(got(i, j, 0, t) - want(i, j, 0, t)) < 1e-12);
}

TEST_CASE("rmse_per_dyad counts and values") {
  const Index m = 5, v = 2, horizon = 7;
  Tensor4 y(m, m, v, horizon), yhat(m, m, v, horizon);
  auto table = mltr::rmse_per_dyad(y, yhat);
  CHECK(table.size() == static_cast<std::size_t>(v * m * (m - 1)));
  for (const auto& row : table) CHECK(row.rmse == 0.0);

  for (Index t = 0; t < horizon; ++t)
    for (Index w = 0; w < v; ++w)
      for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < m; ++i)
          if (i != j) yhat(i, j, w, t) = 1.0;  // constant unit error
  table = mltr::rmse_per_dyad(y, yhat);
  for (const auto& row : table) CHECK(row.rmse == 1.0);
}

TEST_CASE("posterior_mean averages the stored draws") {
  const auto series = mltr::simulate_synthetic(3, 1, 8, planted_truth(3, 1, 1), 0.2, 2);
  const DesignTensor design = design_from_series(series);
  ModelSpec spec;
  spec.iterations = 50;
  spec.burn_in = 20;
  const mltr::FitResult fit = mltr::gibbs_fit(design.response, design, spec);
  const CoefficientSet mean = mltr::posterior_mean(fit);
  Matrix acc = Matrix::Zero(3, 3);
  for (const auto& d : fit.chain) acc += d.b1;
  acc /= static_cast<double>(fit.chain.size());
  CHECK((mean.b1 - acc).cwiseAbs().maxCoeff() < 1e-14);
}
