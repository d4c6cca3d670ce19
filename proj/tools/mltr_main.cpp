// mltr command line tool: ingest coded event data, fit the multilinear
// autoregression, diagnose a fit, simulate synthetic panels and evaluate
// predictions. All commands are driven by a JSON config file; a few flags
// override config keys. Every run writes a manifest with input/output
// hashes so it can be reproduced exactly.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "mltr/diagnostics.hpp"
#include "mltr/fit_io.hpp"
#include "mltr/ingest.hpp"
#include "mltr/run_config.hpp"
#include "mltr/tensor_io.hpp"

namespace {

using nlohmann::json;

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string method;
  std::vector<std::string> variables;
};

mltr::RunConfig load_config(const Flags& flags) {
  mltr::RunConfig cfg = mltr::RunConfig::from_file(flags.config_path);
  if (flags.seed) {
    cfg.model.seed = *flags.seed;
    if (cfg.simulate) cfg.simulate->seed = *flags.seed;
  }
  if (!flags.out.empty()) cfg.output.dir = flags.out;
  if (!flags.method.empty()) {
    if (flags.method != "gibbs" && flags.method != "als")
      throw std::invalid_argument("--method must be 'gibbs' or 'als'");
    cfg.method = flags.method;
  }
  if (!flags.variables.empty()) {
    cfg.variables = flags.variables;
    if (cfg.aggregation) {
      cfg.aggregation->variables.clear();
      for (const auto& name : flags.variables) {
        const auto q = mltr::quad_from_string(name);
        if (!q) throw std::invalid_argument("--variables: unknown quad class '" + name + "'");
        cfg.aggregation->variables.push_back(*q);
      }
    }
  }
  std::filesystem::create_directories(cfg.output.dir);
  return cfg;
}

json flags_json(const Flags& flags) {
  json j = json::object();
  if (flags.seed) j["seed"] = *flags.seed;
  if (!flags.out.empty()) j["out"] = flags.out;
  if (!flags.method.empty()) j["method"] = flags.method;
  if (!flags.variables.empty()) j["variables"] = flags.variables;
  return j;
}

mltr::RelationalSeries series_from_file(const std::string& path) {
  const auto loaded = mltr::load_tensor(path);
  mltr::RelationalSeries series;
  series.data = loaded.data;
  const auto& meta = loaded.meta;
  series.actors = meta.value("actors", std::vector<std::string>{});
  series.variables = meta.value("variables", std::vector<std::string>{});
  series.periods = meta.value("periods", std::vector<std::string>{});
  if (series.actors.empty()) series.actors = mltr::default_labels("a", series.data.dim(1));
  if (series.variables.empty()) series.variables = mltr::default_labels("v", series.data.dim(3));
  if (series.periods.empty()) series.periods = mltr::default_labels("t", series.data.dim(4));
  series.validate();
  return series;
}

void save_series(const std::string& path, const mltr::RelationalSeries& series,
                 const std::string& kind) {
  json meta;
  meta["kind"] = kind;
  meta["actors"] = series.actors;
  meta["variables"] = series.variables;
  meta["periods"] = series.periods;
  mltr::save_tensor(path, series.data, meta);
}

mltr::RelationalSeries subset_variables(const mltr::RelationalSeries& series,
                                        const std::vector<std::string>& wanted) {
  if (wanted.empty()) return series;
  std::vector<mltr::Index> pick;
  for (const auto& name : wanted) {
    const auto it = std::find(series.variables.begin(), series.variables.end(), name);
    if (it == series.variables.end())
      throw std::invalid_argument("variable subset: '" + name + "' not present in tensor");
    pick.push_back(static_cast<mltr::Index>(it - series.variables.begin()));
  }
  mltr::RelationalSeries out;
  out.actors = series.actors;
  out.periods = series.periods;
  for (const auto& name : wanted) out.variables.push_back(name);
  const mltr::Index m = series.m(), n = series.n();
  out.data = mltr::Tensor4(m, m, static_cast<mltr::Index>(pick.size()), n);
  for (mltr::Index t = 0; t < n; ++t)
    for (std::size_t w = 0; w < pick.size(); ++w)
      for (mltr::Index j = 0; j < m; ++j)
        for (mltr::Index i = 0; i < m; ++i)
          out.data(i, j, static_cast<mltr::Index>(w), t) = series.data(i, j, pick[w], t);
  return out;
}

mltr::RelationalSeries preprocess(const mltr::RelationalSeries& raw,
                                  const mltr::PreprocessingConfig& pre) {
  mltr::RelationalSeries series = raw;
  if (pre.qq_normalize) series = mltr::qq_normalize(series);
  if (pre.demean) series = mltr::demean(series);
  return series;
}

int cmd_ingest(const Flags& flags) {
  const auto cfg = load_config(flags);
  if (cfg.input.events.empty())
    throw std::invalid_argument("ingest: config needs input.events");
  if (!cfg.aggregation) throw std::invalid_argument("ingest: config needs an aggregation section");
  mltr::Manifest manifest("ingest", cfg.output.dir);
  manifest.record_config(flags.config_path);
  manifest.set("flag_overrides", flags_json(flags));
  manifest.record_input(cfg.input.events);

  std::optional<mltr::CameoMap> cameo;
  if (!cfg.input.cameo_map.empty()) {
    cameo = mltr::load_cameo_map(cfg.input.cameo_map);
    manifest.record_input(cfg.input.cameo_map);
  }
  const auto parsed = mltr::parse_events_file(cfg.input.events, cameo ? &*cameo : nullptr);
  if (parsed.records.empty())
    throw std::runtime_error("ingest: no valid event records in " + cfg.input.events);

  mltr::AggregateReport agg_report;
  const auto series = mltr::aggregate(parsed.records, *cfg.aggregation, &agg_report);

  const std::string tensor_path = cfg.output.dir + "/panel.tnsr";
  save_series(tensor_path, series, "series");
  manifest.record_output(tensor_path);

  json report;
  report["rows_parsed"] = parsed.records.size();
  report["rows_rejected"] = parsed.issues.size();
  json issues = json::array();
  for (const auto& issue : parsed.issues)
    issues.push_back({{"line", issue.line}, {"message", issue.message}});
  report["issues"] = issues;
  report["aggregation"] = {{"used", agg_report.used},
                           {"dropped_actor", agg_report.dropped_actor},
                           {"dropped_variable", agg_report.dropped_variable},
                           {"dropped_period", agg_report.dropped_period}};
  report["dims"] = {series.m(), series.m(), series.v(), series.n()};
  const std::string report_path = cfg.output.dir + "/ingest_report.json";
  std::ofstream rep(report_path);
  rep << report.dump(2) << '\n';
  rep.close();
  manifest.record_output(report_path);

  if (cfg.wants("tensor_csv", false)) {
    const std::string csv_path = cfg.output.dir + "/panel_long.csv";
    mltr::write_long_csv(csv_path, series.data);
    manifest.record_output(csv_path);
  }
  std::cout << "ingest: wrote " << tensor_path << " with dims " << series.m() << "x"
            << series.m() << "x" << series.v() << "x" << series.n() << " ("
            << parsed.issues.size() << " rejected rows)\n";
  manifest.write();
  return 0;
}

int cmd_simulate(const Flags& flags) {
  const auto cfg = load_config(flags);
  if (!cfg.simulate) throw std::invalid_argument("simulate: config needs a simulate section");
  const auto& sim = *cfg.simulate;
  mltr::Manifest manifest("simulate", cfg.output.dir);
  manifest.record_config(flags.config_path);
  manifest.set("flag_overrides", flags_json(flags));
  manifest.set("seed", sim.seed);

  const auto series =
      mltr::simulate_synthetic(sim.m, sim.v, sim.n, sim.coefficients(), sim.sigma, sim.seed);
  const std::string tensor_path = cfg.output.dir + "/synthetic.tnsr";
  save_series(tensor_path, series, "series");
  manifest.record_output(tensor_path);
  if (cfg.wants("tensor_csv", false)) {
    const std::string csv_path = cfg.output.dir + "/synthetic_long.csv";
    mltr::write_long_csv(csv_path, series.data);
    manifest.record_output(csv_path);
  }
  std::cout << "simulate: wrote " << tensor_path << " (m=" << sim.m << ", v=" << sim.v
            << ", n=" << sim.n << ", sigma=" << sim.sigma << ")\n";
  manifest.write();
  return 0;
}

int cmd_fit(const Flags& flags) {
  const auto cfg = load_config(flags);
  if (cfg.input.tensor.empty()) throw std::invalid_argument("fit: config needs input.tensor");
  mltr::Manifest manifest("fit", cfg.output.dir);
  manifest.record_config(flags.config_path);
  manifest.set("flag_overrides", flags_json(flags));
  manifest.record_input(cfg.input.tensor);

  auto series = subset_variables(series_from_file(cfg.input.tensor), cfg.variables);
  series = preprocess(series, cfg.preprocessing);
  const mltr::DesignTensor design =
      mltr::build_design(series, {cfg.preprocessing.standardize_transitive});

  mltr::FitResult fit;
  if (cfg.method == "gibbs") {
    fit = mltr::gibbs_fit(design.response, design, cfg.model);
  } else {
    const mltr::AlsFit als = mltr::als_fit(design.response, design, cfg.model);
    fit.chain.push_back(als.coef);
    fit.als_start = als.coef;
    fit.spec = cfg.model;
    fit.m = series.m();
    fit.v = series.v();
    fit.horizon = design.horizon();
    fit.rank_deficient_start = als.rank_deficient;
  }
  fit.actors = series.actors;
  fit.variables = series.variables;

  const std::string fit_path = cfg.output.dir + "/run.fit";
  mltr::save_fit(fit_path, fit, cfg.method);
  manifest.record_output(fit_path);

  const std::string summary_path = cfg.output.dir + "/b3_summary.csv";
  mltr::write_b3_summary_csv(summary_path, fit);
  manifest.record_output(summary_path);

  manifest.set("seed", cfg.model.seed);
  manifest.set("model", {{"method", cfg.method},
                         {"iterations", cfg.model.iterations},
                         {"burn_in", cfg.model.burn_in},
                         {"tau2", cfg.model.tau2},
                         {"sigma2_shape", cfg.model.sigma2_shape},
                         {"sigma2_scale", cfg.model.sigma2_scale},
                         {"als_tolerance", cfg.model.als_tolerance},
                         {"als_max_sweeps", cfg.model.als_max_sweeps}});
  manifest.set("preprocessing", {{"qq_normalize", cfg.preprocessing.qq_normalize},
                                 {"demean", cfg.preprocessing.demean},
                                 {"standardize_transitive",
                                  cfg.preprocessing.standardize_transitive}});
  std::cout << "fit: method=" << cfg.method << ", draws=" << fit.chain.size() << ", wrote "
            << fit_path << "\n";
  manifest.write();
  return 0;
}

int cmd_diagnose(const Flags& flags) {
  const auto cfg = load_config(flags);
  if (cfg.input.fit.empty()) throw std::invalid_argument("diagnose: config needs input.fit");
  mltr::Manifest manifest("diagnose", cfg.output.dir);
  manifest.record_config(flags.config_path);
  manifest.set("flag_overrides", flags_json(flags));
  manifest.record_input(cfg.input.fit);

  const auto loaded = mltr::load_fit(cfg.input.fit);
  const mltr::FitResult& fit = loaded.fit;
  if (fit.chain.empty()) throw std::runtime_error("diagnose: fit file has an empty chain");

  if (cfg.wants("trace", true)) {
    const std::string path = cfg.output.dir + "/trace.csv";
    mltr::write_trace_csv(path, fit);
    manifest.record_output(path);
  }
  if (cfg.wants("b3_summary", true)) {
    const std::string path = cfg.output.dir + "/b3_summary.csv";
    mltr::write_b3_summary_csv(path, fit);
    manifest.record_output(path);
  }
  if (cfg.wants("edges", true)) {
    for (const auto which : {mltr::CoefBlock::b1, mltr::CoefBlock::b2}) {
      const std::string tag = which == mltr::CoefBlock::b1 ? "b1" : "b2";
      const auto net = mltr::coefficient_network(fit, which, 0.99);
      const std::string pos_path = cfg.output.dir + "/edges_" + tag + ".csv";
      mltr::write_edges_csv(pos_path, fit, net.positive);
      manifest.record_output(pos_path);
      const std::string neg_path = cfg.output.dir + "/edges_" + tag + "_negative.csv";
      mltr::write_edges_csv(neg_path, fit, net.negative);
      manifest.record_output(neg_path);
      if (cfg.wants("diagonal", true)) {
        const std::string diag_path = cfg.output.dir + "/diagonal_" + tag + ".csv";
        mltr::write_diagonal_csv(diag_path, fit, net.diagonal);
        manifest.record_output(diag_path);
      }
    }
    json dominance;
    dominance["b1"] = mltr::diag_dominance(fit, mltr::CoefBlock::b1);
    dominance["b2"] = mltr::diag_dominance(fit, mltr::CoefBlock::b2);
    manifest.set("diag_dominance", dominance);
  }
  if (cfg.wants("convergence", true) && fit.chain.size() >= 20) {
    const std::string path = cfg.output.dir + "/convergence.csv";
    const std::vector<mltr::FitResult> fits{fit};
    mltr::write_convergence_csv(path, mltr::convergence_stats(fits));
    manifest.record_output(path);
  }
  std::cout << "diagnose: processed " << fit.chain.size() << " draws from " << cfg.input.fit
            << "\n";
  manifest.write();
  return 0;
}

int cmd_evaluate(const Flags& flags) {
  const auto cfg = load_config(flags);
  mltr::Manifest manifest("evaluate", cfg.output.dir);
  manifest.record_config(flags.config_path);
  manifest.set("flag_overrides", flags_json(flags));

  std::vector<mltr::DyadRmse> table;
  mltr::Index m = 0, v = 0;
  std::vector<std::string> actors, variables;

  if (!cfg.input.predicted.empty() || !cfg.input.observed.empty()) {
    if (cfg.input.predicted.empty() || cfg.input.observed.empty())
      throw std::invalid_argument("evaluate: need both input.predicted and input.observed");
    manifest.record_input(cfg.input.predicted);
    manifest.record_input(cfg.input.observed);
    const auto pred = mltr::load_tensor(cfg.input.predicted);
    const auto obs = mltr::load_tensor(cfg.input.observed);
    table = mltr::rmse_per_dyad(obs.data, pred.data);
    m = obs.data.dim(1);
    v = obs.data.dim(3);
    actors = obs.meta.value("actors", std::vector<std::string>{});
    variables = obs.meta.value("variables", std::vector<std::string>{});
  } else {
    if (cfg.input.fit.empty() || cfg.input.tensor.empty())
      throw std::invalid_argument(
          "evaluate: need input.fit plus input.tensor, or input.predicted plus input.observed");
    manifest.record_input(cfg.input.fit);
    manifest.record_input(cfg.input.tensor);
    const auto loaded = mltr::load_fit(cfg.input.fit);
    auto series = subset_variables(series_from_file(cfg.input.tensor), cfg.variables);
    series = preprocess(series, cfg.preprocessing);
    const auto design = mltr::build_design(series, {cfg.preprocessing.standardize_transitive});
    const auto coef = mltr::posterior_mean(loaded.fit);
    const auto yhat = mltr::predict(design, coef);
    table = mltr::rmse_per_dyad(design.response, yhat);
    m = series.m();
    v = series.v();
    actors = series.actors;
    variables = series.variables;
  }

  const auto surf = mltr::rmse_surface(table, m, v, actors, variables);
  if (cfg.wants("rmse_grid", true))
    for (mltr::Index w = 0; w < v; ++w) {
      const std::string path =
          cfg.output.dir + "/rmse_grid_" + surf.variables[static_cast<std::size_t>(w)] + ".csv";
      mltr::write_rmse_grid_csv(path, surf, w);
      manifest.record_output(path);
    }
  if (cfg.wants("rmse_long", true)) {
    const std::string path = cfg.output.dir + "/rmse_long.csv";
    mltr::write_rmse_long_csv(path, table, surf.actors, surf.variables);
    manifest.record_output(path);
  }
  if (cfg.wants("rmse_json", false)) {
    const std::string path = cfg.output.dir + "/rmse_grid.json";
    mltr::write_rmse_grid_json(path, surf);
    manifest.record_output(path);
  }
  std::cout << "evaluate: " << table.size() << " dyad series scored\n";
  manifest.write();
  return 0;
}

void write_error_report(const Flags& flags, const std::string& command,
                        const std::string& message) {
  try {
    std::string dir = "out";
    if (!flags.out.empty()) {
      dir = flags.out;
    } else if (!flags.config_path.empty()) {
      // Use the configured output dir when the config itself is readable.
      try {
        dir = mltr::RunConfig::from_file(flags.config_path).output.dir;
      } catch (...) {
      }
    }
    std::filesystem::create_directories(dir);
    json err;
    err["command"] = command;
    err["error"] = message;
    std::ofstream out(dir + "/error.json");
    out << err.dump(2) << '\n';
  } catch (...) {
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relational multilinear tensor autoregression toolkit"};
  app.require_subcommand(1);

  Flags flags;
  std::string command;
  for (const auto& name : {"ingest", "fit", "diagnose", "simulate", "evaluate"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", flags.config_path, "JSON config file")->required();
    sub->add_option("--seed", flags.seed, "override the run seed");
    sub->add_option("--out", flags.out, "override the output directory");
    sub->add_option("--method", flags.method, "fit method: gibbs or als");
    sub->add_option("--variables", flags.variables, "comma separated variable subset")
        ->delimiter(',');
    sub->callback([&command, name]() { command = name; });
  }

  CLI11_PARSE(app, argc, argv);
  try {
    if (command == "ingest") return cmd_ingest(flags);
    if (command == "fit") return cmd_fit(flags);
    if (command == "diagnose") return cmd_diagnose(flags);
    if (command == "simulate") return cmd_simulate(flags);
    if (command == "evaluate") return cmd_evaluate(flags);
    std::cerr << "unknown command\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mltr " << command << ": " << e.what() << "\n";
    write_error_report(flags, command, e.what());
    return 1;
  }
}
