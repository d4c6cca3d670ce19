#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "mltr/fit_io.hpp"
#include "mltr/tensor_io.hpp"
#include "oracles.hpp"

using mltr::Index;
using mltr::Tensor4;

TEST_CASE("tensor container round trip is bit exact") {
  mltr::Rng rng(71);
  const Tensor4 x = oracle::random_tensor(3, 3, 2, 5, rng);
  nlohmann::json meta;
  meta["kind"] = "series";
  meta["actors"] = {"a", "b", "c"};
  const std::string path = "/tmp/mltr_io_roundtrip.tnsr";
  mltr::save_tensor(path, x, meta);
  const auto loaded = mltr::load_tensor(path);
  CHECK(loaded.data.dims() == x.dims());
  CHECK(loaded.data.values() == x.values());
  CHECK(loaded.meta.at("kind") == "series");
  CHECK(loaded.meta.at("layout") == "mode1-fastest");
  CHECK(loaded.meta.at("actors").size() == 3);
}

TEST_CASE("tensor container rejects foreign or truncated files") {
  const std::string garbage = "/tmp/mltr_io_garbage.tnsr";
  {
    std::ofstream out(garbage);
    out << "{\"format\":\"something-else\"}\n";
  }
  CHECK_THROWS_AS(mltr::load_tensor(garbage), std::runtime_error);

  mltr::Rng rng(73);
  const Tensor4 x = oracle::random_tensor(4, 4, 2, 3, rng);
  const std::string path = "/tmp/mltr_io_trunc.tnsr";
  mltr::save_tensor(path, x);
  // chop off the last 16 payload bytes
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 16));
  out.close();
  CHECK_THROWS_AS(mltr::load_tensor(path), std::runtime_error);

  CHECK_THROWS_AS(mltr::load_tensor("/tmp/does_not_exist.tnsr"), std::runtime_error);
}

TEST_CASE("long CSV export uses 1-based indices in the documented order") {
  Tensor4 x(2, 2, 1, 2);
  x(0, 1, 0, 0) = 2.5;
  x(1, 0, 0, 1) = -1.25;
  std::ostringstream out;
  mltr::write_long_csv(out, x);
  const std::string got = out.str();
  const std::string want =
      "i,j,w,t,value\n"
      "1,1,1,1,0\n"
      "2,1,1,1,0\n"
      "1,2,1,1,2.5\n"
      "2,2,1,1,0\n"
      "1,1,1,2,0\n"
      "2,1,1,2,-1.25\n"
      "1,2,1,2,0\n"
      "2,2,1,2,0\n";
  CHECK(got == want);
}

TEST_CASE("fit container round trip preserves chain, start and spec") {
  mltr::Rng rng(79);
  mltr::FitResult fit;
  fit.m = 3;
  fit.v = 1;
  fit.horizon = 9;
  fit.spec.iterations = 120;
  fit.spec.burn_in = 20;
  fit.spec.seed = 4242;
  fit.spec.tau2 = 2.5;
  fit.actors = {"x", "y", "z"};
  fit.variables = {"q"};
  fit.rank_deficient_start = true;
  fit.als_start.b1 = oracle::random_matrix(3, 3, rng);
  fit.als_start.b2 = oracle::random_matrix(3, 3, rng);
  fit.als_start.b3 = oracle::random_matrix(1, 3, rng);
  fit.als_start.sigma2 = 0.5;
  for (int k = 0; k < 100; ++k) {
    mltr::CoefficientSet c;
    c.b1 = oracle::random_matrix(3, 3, rng);
    c.b2 = oracle::random_matrix(3, 3, rng);
    c.b3 = oracle::random_matrix(1, 3, rng);
    c.sigma2 = std::exp(rng.normal());
    fit.chain.push_back(std::move(c));
  }

  const std::string path = "/tmp/mltr_io_fit.fit";
  mltr::save_fit(path, fit, "gibbs");
  const auto loaded = mltr::load_fit(path);
  CHECK(loaded.method == "gibbs");
  const mltr::FitResult& got = loaded.fit;
  CHECK(got.m == 3);
  CHECK(got.v == 1);
  CHECK(got.horizon == 9);
  CHECK(got.spec.iterations == 120);
  CHECK(got.spec.burn_in == 20);
  CHECK(got.spec.seed == 4242);
  CHECK(got.spec.tau2 == 2.5);
  CHECK(got.actors == fit.actors);
  CHECK(got.variables == fit.variables);
  CHECK(got.rank_deficient_start);
  CHECK(got.als_start.b1 == fit.als_start.b1);
  REQUIRE(got.chain.size() == fit.chain.size());
  for (std::size_t k = 0; k < got.chain.size(); ++k) {
    CHECK(got.chain[k].b1 == fit.chain[k].b1);
    CHECK(got.chain[k].b2 == fit.chain[k].b2);
    CHECK(got.chain[k].b3 == fit.chain[k].b3);
    CHECK(got.chain[k].sigma2 == fit.chain[k].sigma2);
  }
}

TEST_CASE("fit container rejects foreign files and truncation") {
  const std::string path = "/tmp/mltr_io_badfit.fit";
  {
    std::ofstream out(path);
    out << "{\"format\":\"mltr.tensor4\"}\n";
  }
  CHECK_THROWS_AS(mltr::load_fit(path), std::runtime_error);

  mltr::FitResult fit;
  fit.m = 3;
  fit.v = 1;
  fit.horizon = 2;
  fit.als_start.b1 = mltr::Matrix::Identity(3, 3);
  fit.als_start.b2 = mltr::Matrix::Identity(3, 3);
  fit.als_start.b3 = mltr::Matrix::Zero(1, 3);
  fit.chain.push_back(fit.als_start);
  mltr::save_fit(path, fit, "als");
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));
  out.close();
  CHECK_THROWS_AS(mltr::load_fit(path), std::runtime_error);
}
