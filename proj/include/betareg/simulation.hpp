#pragma once

// Scenario catalog and Monte Carlo engine.
//
// Covariates are drawn once per experiment as a 20-row block from the
// scenario's design seed and the block is replicated to length n, so the
// design (and the realized dispersion ratio) does not change with n.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "betareg/dataset.hpp"
#include "betareg/diagnostics.hpp"
#include "betareg/error.hpp"
#include "betareg/estimation.hpp"
#include "betareg/random.hpp"

namespace betareg {

enum class MuRange { mid, high, low };
enum class Estimated { correct, linear };

inline std::string_view mu_range_name(MuRange r) {
  switch (r) {
    case MuRange::mid: return "mid";
    case MuRange::high: return "high";
    case MuRange::low: return "low";
  }
  return "?";
}

inline MuRange parse_mu_range(std::string_view s) {
  if (s == "mid") return MuRange::mid;
  if (s == "high") return MuRange::high;
  if (s == "low") return MuRange::low;
  throw UsageError("unknown mu range '" + std::string(s) + "' (expected mid, high or low)");
}

inline std::string_view estimated_name(Estimated e) {
  return e == Estimated::correct ? "correct" : "linear";
}

inline Estimated parse_estimated(std::string_view s) {
  if (s == "correct") return Estimated::correct;
  if (s == "linear") return Estimated::linear;
  throw UsageError("unknown estimated model '" + std::string(s) +
                   "' (expected correct or linear)");
}

struct CovariateLaw {
  std::string name;
  double lo = 0.0, hi = 1.0;  // uniform on (lo, hi)
};

// Parameter vector selected by a level label (phi for fixed dispersion,
// the nominal lambda for varying dispersion).
struct ScenarioLevel {
  double label = 0.0;
  std::vector<double> gamma;
};

struct ScenarioSpec {
  std::string id;
  std::string description;

  std::string true_mean, true_precision;
  std::vector<double> beta;
  bool varying_dispersion = false;
  std::vector<ScenarioLevel> levels;  // empty for fixed phi: any phi > 0

  std::string est_mean, est_precision;
  bool anchor_at_truth = false;  // starting anchors for nonlinear fits

  std::vector<CovariateLaw> covariates;
  std::size_t block_size = 20;
  std::uint64_t design_seed = 1;
  std::vector<std::size_t> sizes;

  double mu_lo = 0.0, mu_hi = 1.0;
  MuRange mu_range = MuRange::mid;
  Estimated estimated = Estimated::correct;

  std::vector<std::string> schema() const {
    std::vector<std::string> s;
    for (const auto& c : covariates) s.push_back(c.name);
    return s;
  }

  // Precision parameters for a level. Fixed dispersion: (log phi).
  std::vector<double> gamma_for(double level) const {
    if (!varying_dispersion) {
      if (!(level > 0.0)) throw UsageError("phi must be positive");
      return {std::log(level)};
    }
    for (const auto& l : levels)
      if (l.label == level) return l.gamma;
    std::string avail;
    for (const auto& l : levels) avail += (avail.empty() ? "" : ", ") + detail::shortest(l.label);
    throw UsageError("scenario " + id + " has no lambda level " + detail::shortest(level) +
                     " (available: " + avail + ")");
  }

  ModelSpec true_model() const {
    return make_model(true_mean, LinkKind::logit, true_precision, LinkKind::log, schema());
  }

  ModelSpec estimated_model(double level) const {
    ModelSpec m = make_model(est_mean, LinkKind::logit, est_precision, LinkKind::log, schema());
    if (anchor_at_truth) {
      if (!m.mean.linear)
        for (double b : beta) m.mean_start.emplace_back(b);
      if (!m.precision.linear)
        for (double g : gamma_for(level)) m.precision_start.emplace_back(g);
    }
    return m;
  }
};

namespace detail {

inline std::vector<CovariateLaw> uniform_laws(std::initializer_list<const char*> names,
                                              double lo, double hi) {
  std::vector<CovariateLaw> v;
  for (const char* n : names) v.push_back({n, lo, hi});
  return v;
}

inline void append(std::vector<CovariateLaw>& a, const std::vector<CovariateLaw>& b) {
  a.insert(a.end(), b.begin(), b.end());
}

}  // namespace detail

inline const std::vector<std::string>& scenario_ids() {
  static const std::vector<std::string> ids = {"s1", "s2", "s3", "s4", "s5",
                                               "s6", "s7", "s8", "nl-mean", "nl-disp"};
  return ids;
}

struct ScenarioOptions {
  MuRange mu_range = MuRange::mid;
  Estimated estimated = Estimated::correct;
  std::optional<std::uint64_t> design_seed;
};

inline ScenarioSpec build_scenario(const std::string& id, const ScenarioOptions& opt = {}) {
  ScenarioSpec s;
  s.id = id;
  s.mu_range = opt.mu_range;
  s.estimated = opt.estimated;
  const bool omitted_covariates = id == "s1" || id == "s2" || id == "s3" || id == "s4";
  const bool nonlinear = id == "nl-mean" || id == "nl-disp";
  if (!omitted_covariates && opt.mu_range != MuRange::mid)
    throw UsageError("scenario " + id + " has a single mean range");
  if (!nonlinear && opt.estimated != Estimated::correct)
    throw UsageError("scenario " + id + " has a fixed estimated model");

  if (omitted_covariates) {
    s.true_mean = "b1 + b2*x2 + b3*x3 + b4*x4 + b5*x5";
    s.true_precision = "g1";
    s.covariates = detail::uniform_laws({"x2", "x3", "x4", "x5"}, 0.0, 1.0);
    s.sizes = {40, 80, 120, 400};
    switch (opt.mu_range) {
      case MuRange::mid:
        s.beta = {-1.9, 1.2, 1.0, 1.1, 1.3};
        s.mu_lo = 0.20, s.mu_hi = 0.88;
        break;
      case MuRange::high:
        s.beta = {1.8, 1.2, 1.0, 1.1, 0.9};
        s.mu_lo = 0.90, s.mu_hi = 0.99;
        break;
      case MuRange::low:
        s.beta = {-1.5, -1.2, -1.0, -1.1, -1.3};
        s.mu_lo = 0.005, s.mu_hi = 0.12;
        break;
    }
    static const char* const est[] = {"b1 + b2*x2", "b1 + b2*x2 + b3*x3",
                                      "b1 + b2*x2 + b3*x3 + b4*x4",
                                      "b1 + b2*x2 + b3*x3 + b4*x4 + b5*x5"};
    const int which = id[1] - '1';
    s.est_mean = est[which];
    s.est_precision = "g1";
    static const char* const omitted[] = {"three covariates omitted", "two covariates omitted",
                                          "one covariate omitted", "correctly specified"};
    s.description = std::string("fixed dispersion, ") + omitted[which];
    // Scenarios 1-4 share the design of their mean range.
    static const std::uint64_t seeds[3] = {22, 22, 113};
    s.design_seed = seeds[static_cast<int>(opt.mu_range)];
  } else if (id == "s5") {
    s.true_mean = "b1 + b2*x2";
    s.true_precision = "g1 + g2*z2";
    s.beta = {-1.3, 3.2};
    s.varying_dispersion = true;
    s.levels = {{20, {3.5, 3.0}}, {50, {3.5, 4.0}}, {150, {3.5, 5.0}}};
    s.covariates = detail::uniform_laws({"x2"}, 0.0, 1.0);
    detail::append(s.covariates, detail::uniform_laws({"z2"}, -0.5, 0.5));
    s.est_mean = "b1 + b2*x2";
    s.est_precision = "g1";
    s.mu_lo = 0.22, s.mu_hi = 0.87;
    s.description = "varying dispersion fitted with fixed dispersion";
    s.sizes = {40, 80, 120};
    s.design_seed = 78;
  } else if (id == "s6") {
    s.true_mean = "b1 + b2*x2 + b3*x3 + b4*x4";
    s.true_precision = "g1 + g2*z2 + g3*z3 + g4*z4";
    s.beta = {-1.9, 1.2, 1.6, 2.0};
    s.varying_dispersion = true;
    s.levels = {{20, {2.4, 1.2, -1.7, 1.0}}, {50, {2.9, 2.0, -1.7, 2.0}},
                {100, {2.9, 2.0, -1.7, 2.8}}};
    s.covariates = detail::uniform_laws({"x2", "x3", "x4"}, 0.0, 1.0);
    detail::append(s.covariates, detail::uniform_laws({"z2", "z3", "z4"}, -0.5, 0.5));
    s.est_mean = s.true_mean;
    s.est_precision = "g1";
    s.mu_lo = 0.24, s.mu_hi = 0.88;
    s.description = "varying dispersion fitted with fixed dispersion";
    s.sizes = {40, 80, 120};
    s.design_seed = 79;
  } else if (id == "s7" || id == "s8") {
    s.true_mean = "b1 + b2*x2 + b3*x3 + b4*x4 + b5*x5";
    s.true_precision = "g1 + g2*z2 + g3*z3 + g4*z4 + g5*z5";
    s.beta = {-1.9, 1.2, 1.0, 1.1, 1.3};
    s.varying_dispersion = true;
    s.levels = {{20, {3.2, 2.5, -1.1, 1.9, 2.2}}, {50, {3.2, 2.5, -1.1, 1.9, 3.2}},
                {100, {3.2, 2.5, 1.1, 1.9, 4.0}}};
    s.covariates = detail::uniform_laws({"x2", "x3", "x4", "x5"}, 0.0, 1.0);
    detail::append(s.covariates, detail::uniform_laws({"z2", "z3", "z4", "z5"}, -0.5, 0.5));
    s.est_mean = s.true_mean;
    s.est_precision = id == "s7" ? "g1" : s.true_precision;
    s.mu_lo = 0.20, s.mu_hi = 0.88;
    s.description = id == "s7" ? "varying dispersion fitted with fixed dispersion"
                               : "varying dispersion, correctly specified";
    s.sizes = {40, 80, 120};
    s.design_seed = 43;  // one design for both estimated models
  } else if (id == "nl-mean") {
    s.true_mean = "b1 + x2^b2 + b3*log(x3 - b4) + x3/b5";
    s.true_precision = "g1";
    s.beta = {1.0, 1.9, -2.0, 3.4, 7.2};
    s.covariates = {{"x2", 1.0, 2.0}, {"x3", 4.5, 34.5}};
    s.sizes = {20, 40, 60, 200, 400};
    s.est_precision = "g1";
    if (opt.estimated == Estimated::correct) {
      s.est_mean = s.true_mean;
      s.anchor_at_truth = true;
      s.description = "nonlinear mean, correctly specified";
    } else {
      s.est_mean = "b1 + b2*x2 + b3*x3";
      s.description = "nonlinear mean fitted with a linear predictor";
    }
    s.mu_lo = 0.36, s.mu_hi = 0.98;
    s.design_seed = 114;
  } else if (id == "nl-disp") {
    s.true_mean = "b1 + x^b2";
    s.true_precision = "g1 + z^g2";
    s.beta = {-1.1, 1.7};
    s.varying_dispersion = true;
    s.levels = {{25, {2.6, 3.0}}, {29, {1.6, 3.1}}, {35, {0.9, 3.2}}, {100, {-0.3, 3.9}}};
    s.covariates = {{"x", 0.3, 1.3}, {"z", 0.5, 1.5}};
    s.sizes = {400};
    if (opt.estimated == Estimated::correct) {
      s.est_mean = s.true_mean;
      s.est_precision = s.true_precision;
      s.anchor_at_truth = true;
      s.description = "nonlinear mean and dispersion, correctly specified";
    } else {
      s.est_mean = "b1 + b2*x";
      s.est_precision = "g1 + g2*z";
      s.description = "nonlinear mean and dispersion fitted with linear predictors";
    }
    s.mu_lo = 0.28, s.mu_hi = 0.61;
    s.design_seed = 45;
  } else {
    std::string ids;
    for (const auto& i : scenario_ids()) ids += (ids.empty() ? "" : ", ") + i;
    throw UsageError("unknown scenario '" + id + "' (available: " + ids + ")");
  }
  if (opt.design_seed) s.design_seed = *opt.design_seed;
  return s;
}

// Covariate columns for n observations: one block drawn from the design
// seed, repeated (the last copy truncated when n is not a multiple).
inline Dataset build_design(const ScenarioSpec& spec, std::size_t n) {
  if (n == 0) throw UsageError("n must be positive");
  RandomStream rs(spec.design_seed);
  const auto b = static_cast<Eigen::Index>(spec.block_size);
  Dataset d;
  for (const auto& law : spec.covariates) {
    Eigen::VectorXd block(b);
    for (Eigen::Index i = 0; i < b; ++i) block[i] = rs.uniform(law.lo, law.hi);
    Eigen::VectorXd col(static_cast<Eigen::Index>(n));
    for (Eigen::Index t = 0; t < col.size(); ++t) col[t] = block[t % b];
    d.add_column(law.name, std::move(col));
  }
  d.response = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 0.5);
  d.provenance = "scenario " + spec.id + ", design seed " + std::to_string(spec.design_seed);
  return d;
}

// True mean and precision vectors on a design.
struct TrueParameters {
  Eigen::VectorXd mu, phi;
};

inline TrueParameters true_parameters(const ScenarioSpec& spec, const Dataset& design,
                                      double level) {
  const ModelSpec m = spec.true_model();
  const std::vector<double> gamma = spec.gamma_for(level);
  const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(
      spec.beta.data(), static_cast<Eigen::Index>(spec.beta.size()));
  const Eigen::VectorXd g =
      Eigen::Map<const Eigen::VectorXd>(gamma.data(), static_cast<Eigen::Index>(gamma.size()));
  const BoundModel bound(m, design);
  TrueParameters tp;
  try {
    bound.inverse_links(bound.eta1(beta), bound.eta2(g), tp.mu, tp.phi);
  } catch (const Error& e) {
    throw DomainError("scenario " + spec.id + " yields inadmissible parameters: " + e.what());
  }
  return tp;
}

// The declared mean range is checked against the average true mean.
inline bool mu_range_holds(const ScenarioSpec& spec, const Eigen::VectorXd& mu) {
  const double m = mu.mean();
  return m > spec.mu_lo && m < spec.mu_hi;
}

// Draws responses at the true parameters onto a copy of the design.
inline Dataset generate_dataset(const Dataset& design, const TrueParameters& tp,
                                RandomStream& stream) {
  Dataset d = design;
  for (Eigen::Index t = 0; t < tp.mu.size(); ++t)
    d.response[t] = beta_sample(BetaParams(tp.mu[t], tp.phi[t]), stream);
  return d;
}

inline Dataset generate_dataset(const ScenarioSpec& spec, std::size_t n, double level,
                                RandomStream& stream) {
  const Dataset design = build_design(spec, n);
  const TrueParameters tp = true_parameters(spec, design, level);
  if (!mu_range_holds(spec, tp.mu))
    throw DomainError("scenario " + spec.id + ": mean of true mu " +
                      detail::shortest(tp.mu.mean()) + " outside the declared range");
  return generate_dataset(design, tp, stream);
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& statistic_names() {
  static const std::vector<std::string> names = {"P2",    "P2_c",    "P2_bg", "P2_bg_c",
                                                 "R2_FC", "R2_FC_c", "R2_LR", "R2_LR_c",
                                                 "lambda_hat"};
  return names;
}

struct ReplicationRow {
  std::size_t index = 0;
  bool converged = false;
  std::string error;  // empty unless the replication failed
  std::vector<double> values;  // in statistic_names() order
};

struct StatisticSummary {
  double mean = 0.0, median = 0.0, q1 = 0.0, q3 = 0.0;
  std::size_t count = 0;
};

struct MonteCarloSummary {
  std::string scenario;
  std::string mu_range, estimated;
  std::size_t n = 0;
  double level = 0.0;
  std::size_t replications = 0;
  std::uint64_t seed = 0, design_seed = 0;
  std::size_t excluded = 0;
  double true_lambda = 1.0;
  double true_mu_mean = 0.0, true_mu_min = 0.0, true_mu_max = 0.0;
  std::vector<std::pair<std::string, StatisticSummary>> statistics;
  std::vector<ReplicationRow> rows;

  const StatisticSummary& stat(const std::string& name) const {
    for (const auto& [k, v] : statistics)
      if (k == name) return v;
    throw UsageError("no statistic named '" + name + "'");
  }
};

// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline StatisticSummary summarize(std::vector<double> v) {
  StatisticSummary s;
  s.count = v.size();
  if (v.empty()) {
    s.mean = s.median = s.q1 = s.q3 = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double acc = 0.0;
  for (double x : v) acc += x;
  s.mean = acc / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  s.median = quantile_sorted(v, 0.5);
  s.q1 = quantile_sorted(v, 0.25);
  s.q3 = quantile_sorted(v, 0.75);
  return s;
}

// Aggregates converged rows in index order.
inline void aggregate(MonteCarloSummary& m) {
  const auto& names = statistic_names();
  std::vector<std::vector<double>> cols(names.size());
  m.excluded = 0;
  for (const auto& r : m.rows) {
    if (!r.converged) {
      ++m.excluded;
      continue;
    }
    for (std::size_t j = 0; j < names.size(); ++j) cols[j].push_back(r.values[j]);
  }
  m.statistics.clear();
  for (std::size_t j = 0; j < names.size(); ++j)
    m.statistics.emplace_back(names[j], summarize(std::move(cols[j])));
}

// Fits the estimated model and its null model and returns the statistic
// family; failures are recorded on the row.
inline ReplicationRow run_replication(const ModelSpec& estimated, const Dataset& data,
                                      std::size_t index, const FitOptions& opts = {}) {
  ReplicationRow row;
  row.index = index;
  try {
    const FitResult f = fit(estimated, data, opts);
    const FitResult f0 = fit_null(estimated, data, opts);
    if (!f.converged || !f0.converged) {
      row.error = f.converged ? "null model did not converge" : "fit did not converge";
      return row;
    }
    const DiagnosticsReport d = diagnose(f, f0);
    row.values = {d.p2, d.p2_c, d.p2_bg, d.p2_bg_c, d.r2_fc, d.r2_fc_c, d.r2_lr, d.r2_lr_c,
                  d.lambda};
    row.converged = true;
  } catch (const Error& e) {
    row.error = std::string(e.code()) + ": " + e.what();
  }
  return row;
}

struct MonteCarloOptions {
  std::size_t replications = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;  // 0 means hardware concurrency
  FitOptions fit;
};

inline MonteCarloSummary run_monte_carlo(const ScenarioSpec& spec, std::size_t n, double level,
                                         const MonteCarloOptions& opts) {
  if (opts.replications < 1) throw UsageError("replication count must be at least 1");
  const Dataset design = build_design(spec, n);
  const TrueParameters tp = true_parameters(spec, design, level);
  if (!mu_range_holds(spec, tp.mu))
    throw DomainError("scenario " + spec.id + ": mean of true mu " +
                      detail::shortest(tp.mu.mean()) + " outside the declared range");
  const ModelSpec est = spec.estimated_model(level);

  MonteCarloSummary m;
  m.scenario = spec.id;
  m.mu_range = mu_range_name(spec.mu_range);
  m.estimated = estimated_name(spec.estimated);
  m.n = n;
  m.level = level;
  m.replications = opts.replications;
  m.seed = opts.seed;
  m.design_seed = spec.design_seed;
  m.true_lambda = lambda_intensity(tp.phi);
  m.true_mu_mean = tp.mu.mean();
  m.true_mu_min = tp.mu.minCoeff();
  m.true_mu_max = tp.mu.maxCoeff();
  m.rows.resize(opts.replications);

  auto work = [&](std::size_t r) {
    RandomStream stream = RandomStream::split(opts.seed, r);
    const Dataset data = generate_dataset(design, tp, stream);
    m.rows[r] = run_replication(est, data, r, opts.fit);
  };

  unsigned threads = opts.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                       : opts.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, opts.replications));
  if (threads <= 1) {
    for (std::size_t r = 0; r < opts.replications; ++r) work(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i)
      pool.emplace_back([&] {
        for (std::size_t r; (r = next.fetch_add(1)) < opts.replications;) work(r);
      });
    for (auto& t : pool) t.join();
  }
  aggregate(m);
  return m;
}

}  // namespace betareg
