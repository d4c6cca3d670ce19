#include <catch2/catch_amalgamated.hpp>

#include "mltr/run_config.hpp"

using nlohmann::json;

TEST_CASE("run config parses a full document") {
  const json doc = json::parse(R"({
    "input": {"tensor": "panel.tnsr"},
    "output": {"dir": "results", "exports": ["b3_summary", "trace"]},
    "aggregation": {
      "actors": ["CHN", "USA", "RUS"],
      "variables": ["verbal_conf", "material_conf"],
      "start": "2001-01",
      "end": "2014-12"
    },
    "preprocessing": {"qq_normalize": true, "standardize_transitive": false},
    "model": {"method": "gibbs", "iterations": 500, "burn_in": 100, "seed": 9, "tau2": 4.0},
    "variables": ["verbal_conf"],
    "simulate": {"m": 4, "v": 1, "n": 30, "sigma": 0.2, "seed": 3, "b3": [[0.5, 0, 0]]}
  })");
  const auto cfg = mltr::RunConfig::from_json(doc);
  CHECK(cfg.input.tensor == "panel.tnsr");
  CHECK(cfg.output.dir == "results");
  CHECK(cfg.wants("trace", false));
  CHECK_FALSE(cfg.wants("edges", false));
  REQUIRE(cfg.aggregation.has_value());
  CHECK(cfg.aggregation->actors.size() == 3);
  CHECK(cfg.aggregation->variables[1] == mltr::QuadClass::material_conf);
  CHECK(cfg.aggregation->start.year == 2001);
  CHECK(cfg.aggregation->end.month == 12);
  CHECK(cfg.preprocessing.qq_normalize);
  CHECK_FALSE(cfg.preprocessing.standardize_transitive);
  CHECK(cfg.method == "gibbs");
  CHECK(cfg.model.iterations == 500);
  CHECK(cfg.model.tau2 == 4.0);
  CHECK(cfg.variables == std::vector<std::string>{"verbal_conf"});
  REQUIRE(cfg.simulate.has_value());
  const auto coef = cfg.simulate->coefficients();
  CHECK(coef.b1 == mltr::Matrix::Identity(4, 4));
  CHECK(coef.b3(0, 0) == 0.5);
}

TEST_CASE("defaults apply when sections are omitted") {
  const auto cfg = mltr::RunConfig::from_json(json::object());
  CHECK(cfg.output.dir == "out");
  CHECK(cfg.model.iterations == 8000);
  CHECK(cfg.model.burn_in == 1000);
  CHECK(cfg.model.tau2 == 10.0);
  CHECK(cfg.method == "gibbs");
  CHECK(cfg.preprocessing.qq_normalize);
  CHECK(cfg.preprocessing.standardize_transitive);
  CHECK(cfg.wants("trace", true));  // empty export list means command defaults
}

TEST_CASE("unknown keys are hard errors at every level") {
  CHECK_THROWS_WITH(mltr::RunConfig::from_json(json::parse(R"({"modle": {}})")),
                    Catch::Matchers::ContainsSubstring("modle"));
  CHECK_THROWS_WITH(mltr::RunConfig::from_json(json::parse(R"({"model": {"iters": 7}})")),
                    Catch::Matchers::ContainsSubstring("model.iters"));
  CHECK_THROWS_WITH(
      mltr::RunConfig::from_json(json::parse(R"({"input": {"tensors": "x"}})")),
      Catch::Matchers::ContainsSubstring("input.tensors"));
  CHECK_THROWS_WITH(
      mltr::RunConfig::from_json(json::parse(R"({"output": {"exports": ["nope"]}})")),
      Catch::Matchers::ContainsSubstring("nope"));
}

TEST_CASE("invalid field values are rejected") {
  CHECK_THROWS_AS(mltr::RunConfig::from_json(json::parse(R"({"model": {"method": "mcmc"}})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(mltr::RunConfig::from_json(
                      json::parse(R"({"model": {"iterations": 10, "burn_in": 10}})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      mltr::RunConfig::from_json(json::parse(
          R"({"aggregation": {"actors": ["a","b","c"], "variables": ["nope"],
              "start": "2001-01", "end": "2001-06"}})")),
      std::invalid_argument);
  CHECK_THROWS_AS(
      mltr::RunConfig::from_json(json::parse(
          R"({"aggregation": {"actors": ["a","b","c"], "variables": ["verbal_conf"],
              "start": "2001/01", "end": "2001-06"}})")),
      std::invalid_argument);
}

TEST_CASE("simulate matrices validate their shape") {
  const json doc = json::parse(R"({
    "simulate": {"m": 4, "v": 1, "n": 30, "b3": [[0.5, 0]]}
  })");
  const auto cfg = mltr::RunConfig::from_json(doc);
  CHECK_THROWS_AS(cfg.simulate->coefficients(), std::invalid_argument);

  const json tag = json::parse(R"({
    "simulate": {"m": 4, "v": 1, "n": 30, "b1": "diagonalish"}
  })");
  CHECK_THROWS_AS(mltr::RunConfig::from_json(tag).simulate->coefficients(),
                  std::invalid_argument);
}

TEST_CASE("missing config files and invalid JSON are reported") {
  CHECK_THROWS_AS(mltr::RunConfig::from_file("/tmp/does_not_exist_mltr.json"),
                  std::runtime_error);
  const std::string path = "/tmp/mltr_bad_json.json";
  {
    std::ofstream out(path);
    out << "{not json";
  }
  CHECK_THROWS_AS(mltr::RunConfig::from_file(path), std::runtime_error);
}

TEST_CASE("file hashing is stable and content sensitive") {
  const std::string a = "/tmp/mltr_hash_a.txt", b = "/tmp/mltr_hash_b.txt";
  {
    std::ofstream(a) << "hello";
    std::ofstream(b) << "hello";
  }
  CHECK(mltr::hash_file(a) == mltr::hash_file(b));
  {
    std::ofstream(b) << "hello!";
  }
  CHECK(mltr::hash_file(a) != mltr::hash_file(b));
  CHECK(mltr::hash_file(a).rfind("fnv1a64:", 0) == 0);
}
