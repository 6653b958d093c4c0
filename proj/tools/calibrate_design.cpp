// Ranks candidate design seeds for a scenario group by how closely the
// Monte Carlo means reproduce a set of reference target cells.
//
// loss = sum over cells of (mean P2 - target)^2 + (mean R2_LR - target)^2
//        + lambda_weight * sum over varying-dispersion cells of
//          log(realized lambda / nominal lambda)^2

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include "betareg/io.hpp"

using namespace betareg;

namespace {

struct Cell {
  std::string scenario, estimated = "correct";
  std::size_t n = 40;
  double level = 0.0;
  std::optional<double> p2, r2_lr;
};

struct Group {
  std::string name, mu_range = "mid";
  std::vector<Cell> cells;
};

struct Scored {
  std::uint64_t seed;
  double loss;
  std::vector<std::string> detail;
};

Scored score_seed(const Group& g, std::uint64_t design_seed, const MonteCarloOptions& mo,
                  double lambda_weight) {
  Scored s{design_seed, 0.0, {}};
  for (const auto& c : g.cells) {
    ScenarioOptions so;
    so.mu_range = parse_mu_range(g.mu_range);
    so.estimated = parse_estimated(c.estimated);
    so.design_seed = design_seed;
    const ScenarioSpec spec = build_scenario(c.scenario, so);
    std::string line = c.scenario + " n=" + std::to_string(c.n) + " level=" +
                       detail::shortest(c.level);
    if (spec.varying_dispersion) {
      const Dataset design = build_design(spec, c.n);
      const double lam = lambda_intensity(true_parameters(spec, design, c.level).phi);
      const double e = std::log(lam / c.level);
      s.loss += lambda_weight * e * e;
      line += " lambda=" + detail::shortest(std::round(lam * 100) / 100);
    }
    if (c.p2 || c.r2_lr) {
      MonteCarloSummary m;
      try {
        m = run_monte_carlo(spec, c.n, c.level, mo);
      } catch (const DomainError& e) {
        s.loss = std::numeric_limits<double>::infinity();
        s.detail.push_back(line + " rejected: " + e.what());
        return s;
      }
      if (c.p2) {
        const double v = m.stat("P2").mean;
        s.loss += (v - *c.p2) * (v - *c.p2);
        line += " P2=" + detail::shortest(std::round(v * 1000) / 1000) + "/" +
                detail::shortest(*c.p2);
      }
      if (c.r2_lr) {
        const double v = m.stat("R2_LR").mean;
        s.loss += (v - *c.r2_lr) * (v - *c.r2_lr);
        line += " R2_LR=" + detail::shortest(std::round(v * 1000) / 1000) + "/" +
                detail::shortest(*c.r2_lr);
      }
      if (m.excluded) line += " excluded=" + std::to_string(m.excluded);
    }
    s.detail.push_back(line);
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"design seed calibration"};
  std::string config = "configs/calibration.json", only;
  std::optional<std::uint64_t> from, to;
  std::size_t top = 3;
  unsigned threads = 1;
  app.add_option("--config", config, "calibration targets");
  app.add_option("--group", only, "calibrate only this group");
  app.add_option("--from", from, "first candidate seed");
  app.add_option("--to", to, "last candidate seed");
  app.add_option("--top", top, "seeds to report per group");
  app.add_option("--threads", threads, "worker threads per Monte Carlo run");
  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(config);
    if (!in) throw UsageError("cannot open '" + config + "'");
    const Json j = Json::parse(in);
    MonteCarloOptions mo;
    mo.replications = j.at("replications").get<std::size_t>();
    mo.seed = j.at("seed").get<std::uint64_t>();
    mo.threads = threads;
    const double lambda_weight = j.value("lambda_weight", 0.05);
    const std::uint64_t lo = from.value_or(j.at("seed_range")[0].get<std::uint64_t>());
    const std::uint64_t hi = to.value_or(j.at("seed_range")[1].get<std::uint64_t>());

    for (const auto& gj : j.at("groups")) {
      Group g;
      g.name = gj.at("name").get<std::string>();
      if (!only.empty() && g.name != only) continue;
      g.mu_range = gj.value("mu_range", "mid");
      for (const auto& cj : gj.at("cells")) {
        Cell c;
        c.scenario = cj.at("scenario").get<std::string>();
        c.estimated = cj.value("estimated", "correct");
        c.n = cj.at("n").get<std::size_t>();
        c.level = cj.at("level").get<double>();
        if (cj.contains("P2")) c.p2 = cj.at("P2").get<double>();
        if (cj.contains("R2_LR")) c.r2_lr = cj.at("R2_LR").get<double>();
        g.cells.push_back(c);
      }
      std::vector<Scored> all;
      for (std::uint64_t s = lo; s <= hi; ++s) all.push_back(score_seed(g, s, mo, lambda_weight));
      std::stable_sort(all.begin(), all.end(),
                       [](const Scored& a, const Scored& b) { return a.loss < b.loss; });
      std::cout << "== " << g.name << " (" << all.size() << " candidates)\n";
      for (std::size_t i = 0; i < std::min(top, all.size()); ++i) {
        std::cout << "design seed " << all[i].seed << "  loss " << all[i].loss << '\n';
        for (const auto& l : all[i].detail) std::cout << "    " << l << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "calibrate_design: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
