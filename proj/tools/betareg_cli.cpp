// betareg command-line front end: fit, diagnose, simulate, press-plot.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "betareg/io.hpp"

namespace {

using namespace betareg;

struct ModelFlags {
  std::string config;
  std::string data;
  std::string response;
  std::string mean;
  std::string mean_link;
  std::string prec;
  std::string prec_link;
  std::string out;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "model configuration JSON");
    app->add_option("--data", data, "CSV file with a header row");
    app->add_option("--response", response, "response column (default y)");
    app->add_option("--mean", mean, "mean predictor, e.g. \"b1 + b2*x1\"");
    app->add_option("--mean-link", mean_link, "logit or loglog");
    app->add_option("--prec", prec, "precision predictor (default g1)");
    app->add_option("--prec-link", prec_link, "log, sqrt or identity");
    app->add_option("--out", out, "write the JSON report here instead of stdout");
  }

  // Config values first, command-line flags override.
  ModelConfig resolve() const {
    ModelConfig c;
    if (!config.empty()) c = load_model_config(config);
    if (!data.empty()) c.data_path = data;
    if (!response.empty()) c.response = response;
    if (!mean.empty()) c.mean_formula = mean;
    if (!mean_link.empty()) c.mean_link = parse_link(mean_link);
    if (!prec.empty()) c.precision_formula = prec;
    if (!prec_link.empty()) c.precision_link = parse_link(prec_link);
    if (c.data_path.empty()) throw UsageError("no data file (use --data or the config)");
    if (c.mean_formula.empty()) throw UsageError("no mean formula (use --mean or the config)");
    return c;
  }
};

struct Loaded {
  ModelConfig config;
  Dataset data;
  ModelSpec model;
};

Loaded load(const ModelFlags& flags) {
  Loaded l{flags.resolve(), {}, {}};
  l.data = load_csv(l.config.data_path, l.config.response);
  for (const auto& name : l.config.schema)
    if (std::find(l.data.names.begin(), l.data.names.end(), name) == l.data.names.end())
      throw DataError(l.config.data_path + ": missing documented column '" + name + "'");
  l.model = l.config.bind(l.data.schema());
  return l;
}

void emit(const Json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

template <class F>
void with_file(const std::string& path, F&& write) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write(out);
}

int run(int argc, char** argv) {
  CLI::App app{"Beta regression with varying dispersion: fitting, prediction diagnostics, "
               "Monte Carlo"};
  app.require_subcommand(1);

  ModelFlags fit_flags, diag_flags, plot_flags;
  std::string diag_csv, plot_out;
  auto* fit_cmd = app.add_subcommand("fit", "fit a model and print estimates");
  fit_flags.attach(fit_cmd);
  auto* diag_cmd = app.add_subcommand("diagnose", "fit, then report PRESS, P2 and R2 statistics");
  diag_flags.attach(diag_cmd);
  diag_cmd->add_option("--csv", diag_csv, "per-observation CSV output");
  auto* plot_cmd = app.add_subcommand("press-plot", "PRESS_bg components with the 3*mean line");
  plot_flags.attach(plot_cmd);
  plot_cmd->add_option("--csv", plot_out, "write the table here instead of stdout");

  std::string scenario, mu_range = "mid", estimated = "correct", dump;
  std::size_t n = 40, reps = 1000;
  std::optional<double> phi, lambda;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> design_seed;
  unsigned threads = 1;
  std::string sim_out;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo summary for a catalog scenario");
  sim_cmd->add_option("--scenario", scenario, "s1..s8, nl-mean, nl-disp")->required();
  sim_cmd->add_option("--n", n, "sample size");
  auto* phi_opt = sim_cmd->add_option("--phi", phi, "precision (fixed-dispersion scenarios)");
  auto* lambda_opt =
      sim_cmd->add_option("--lambda", lambda, "dispersion ratio level (varying dispersion)");
  phi_opt->excludes(lambda_opt);
  sim_cmd->add_option("--reps", reps, "replications");
  sim_cmd->add_option("--seed", seed, "master seed");
  sim_cmd->add_option("--design-seed", design_seed, "override the catalog design seed");
  sim_cmd->add_option("--mu-range", mu_range, "mid, high or low (s1..s4)");
  sim_cmd->add_option("--estimated", estimated, "correct or linear (nl-mean, nl-disp)");
  sim_cmd->add_option("--threads", threads, "worker threads, 0 for all cores");
  sim_cmd->add_option("--dump", dump, "per-replication CSV");
  sim_cmd->add_option("--out", sim_out, "write the JSON summary here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << error_to_json(UsageError(e.what())).dump() << '\n';
    return 2;
  }

  if (fit_cmd->parsed()) {
    const Loaded l = load(fit_flags);
    const FitResult f = fit(l.model, l.data, l.config.fit);
    Json j{{"metadata", metadata_json("fit")}};
    j["data"] = {{"source", l.data.provenance}, {"n", l.data.n()}};
    j["fit"] = fit_to_json(f);
    emit(j, fit_flags.out);
  } else if (diag_cmd->parsed()) {
    const Loaded l = load(diag_flags);
    const FitResult f = fit(l.model, l.data, l.config.fit);
    Json j{{"metadata", metadata_json("diagnose")}};
    j["data"] = {{"source", l.data.provenance}, {"n", l.data.n()}};
    j["fit"] = fit_to_json(f);
    if (f.converged) {
      const DiagnosticsReport d = diagnose(f, l.model, l.data, l.config.fit);
      j["diagnostics"] = diagnostics_to_json(d);
      if (!diag_csv.empty())
        with_file(diag_csv, [&](std::ostream& o) { write_observations_csv(o, f, d); });
    } else {
      j["diagnostics"] = nullptr;
    }
    emit(j, diag_flags.out);
  } else if (plot_cmd->parsed()) {
    const Loaded l = load(plot_flags);
    const FitResult f = fit(l.model, l.data, l.config.fit);
    if (!f.converged) {
      Json j{{"metadata", metadata_json("press-plot")}, {"fit", fit_to_json(f)}};
      emit(j, plot_flags.out);
      return 0;
    }
    const auto rows = press_plot_data(f);
    if (plot_out.empty())
      write_press_plot_csv(std::cout, rows);
    else
      with_file(plot_out, [&](std::ostream& o) { write_press_plot_csv(o, rows); });
  } else if (sim_cmd->parsed()) {
    ScenarioOptions so;
    so.mu_range = parse_mu_range(mu_range);
    so.estimated = parse_estimated(estimated);
    so.design_seed = design_seed;
    const ScenarioSpec spec = build_scenario(scenario, so);
    double level;
    if (spec.varying_dispersion) {
      if (phi) throw UsageError("scenario " + scenario + " has varying dispersion; use --lambda");
      level = lambda ? *lambda : spec.levels.back().label;
    } else {
      if (lambda) throw UsageError("scenario " + scenario + " has fixed dispersion; use --phi");
      level = phi ? *phi : 150.0;
    }
    MonteCarloOptions mo;
    mo.replications = reps;
    mo.seed = seed;
    mo.threads = threads;
    const MonteCarloSummary m = run_monte_carlo(spec, n, level, mo);
    Json j{{"metadata", metadata_json("simulate")}};
    j["summary"] = summary_to_json(m);
    emit(j, sim_out);
    if (!dump.empty())
      with_file(dump, [&](std::ostream& o) { write_replications_csv(o, m); });
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const betareg::Error& e) {
    std::cerr << betareg::error_to_json(e).dump() << '\n';
    return betareg::exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << betareg::Json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump()
              << '\n';
    return 1;
  }
}
