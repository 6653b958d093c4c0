#pragma once

// CSV ingestion, model configuration and JSON/CSV report writers.

#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "betareg/dataset.hpp"
#include "betareg/diagnostics.hpp"
#include "betareg/error.hpp"
#include "betareg/estimation.hpp"
#include "betareg/simulation.hpp"

namespace betareg {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolName = "betareg";
inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

// Splits one line on commas; double quotes group a field.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  double v = 0.0;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

inline CsvTable read_csv(std::istream& in, const std::string& source = "<stream>") {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    t.header = detail::split_csv_line(line);
    break;
  }
  if (t.header.empty()) throw DataError(source + ": missing header row");
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (t.header[j].empty())
      throw DataError(source + ": empty column name at column " + std::to_string(j + 1));
    for (std::size_t i = 0; i < j; ++i)
      if (t.header[i] == t.header[j])
        throw DataError(source + ": duplicate column '" + t.header[j] + "'");
  }
  t.columns.assign(t.header.size(), {});
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != t.header.size())
      throw DataError(source + ": row " + std::to_string(row) + " (line " +
                      std::to_string(lineno) + ") has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(t.header.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto v = detail::parse_double(cells[j]);
      if (!v)
        throw DataError(source + ": row " + std::to_string(row) + ", column " +
                        std::to_string(j + 1) + " ('" + t.header[j] + "'): " +
                        (cells[j].empty() ? std::string("missing value")
                                          : "not a number: '" + cells[j] + "'"));
      t.columns[j].push_back(*v);
    }
  }
  return t;
}

inline Dataset dataset_from_table(const CsvTable& t, const std::string& response_column,
                                  const std::string& source) {
  Dataset d;
  bool found = false;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(
        t.columns[j].data(), static_cast<Eigen::Index>(t.columns[j].size()));
    if (t.header[j] == response_column) {
      d.response = std::move(v);
      found = true;
    } else {
      d.add_column(t.header[j], std::move(v));
    }
  }
  if (!found) throw DataError(source + ": no response column '" + response_column + "'");
  d.provenance = source + " (response " + response_column + ")";
  try {
    d.validate();
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
  return d;
}

inline Dataset load_csv(const std::string& path, const std::string& response_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return dataset_from_table(read_csv(in, path), response_column, path);
}

// Response first, then covariates; values in shortest round-trip form.
inline void write_csv(std::ostream& out, const Dataset& d, const std::string& response_column) {
  out << response_column;
  for (const auto& name : d.names) out << ',' << name;
  out << '\n';
  for (Eigen::Index t = 0; t < d.response.size(); ++t) {
    out << detail::shortest(d.response[t]);
    for (const auto& c : d.columns) out << ',' << detail::shortest(c[t]);
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const Dataset& d,
                      const std::string& response_column) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, d, response_column);
}

// ---------------------------------------------------------------------------
// Model configuration

struct ModelConfig {
  std::string name;
  std::string mean_formula;
  LinkKind mean_link = LinkKind::logit;
  std::string precision_formula;  // empty: intercept-only
  LinkKind precision_link = LinkKind::log;
  std::map<std::string, double> mean_start, precision_start;  // by parameter name
  FitOptions fit;
  std::string data_path, response = "y";
  std::vector<std::string> schema;  // documented covariate columns

  ModelSpec bind(const std::vector<std::string>& data_schema) const {
    ModelSpec m = make_model(mean_formula, mean_link, precision_formula, precision_link,
                             data_schema);
    auto anchors = [](const std::map<std::string, double>& start, const PredictorSpec& p,
                      std::vector<std::optional<double>>& out) {
      out.assign(p.param_count, std::nullopt);
      for (const auto& [key, value] : start) {
        std::size_t idx = 0;
        const bool ok = key.size() > 1 && key[0] == p.prefix &&
                        std::from_chars(key.data() + 1, key.data() + key.size(), idx).ptr ==
                            key.data() + key.size() &&
                        idx >= 1 && idx <= p.param_count;
        if (!ok) throw UsageError("start value for unknown parameter '" + key + "'");
        out[idx - 1] = value;
      }
    };
    anchors(mean_start, m.mean, m.mean_start);
    anchors(precision_start, m.precision, m.precision_start);
    return m;
  }
};

namespace detail {

inline const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw UsageError(where + ": missing key '" + key + "'");
  return j.at(key);
}

inline std::map<std::string, double> read_start(const Json& j, const std::string& where) {
  std::map<std::string, double> out;
  if (!j.contains("start")) return out;
  const Json& s = j.at("start");
  if (!s.is_object()) throw UsageError(where + ": 'start' must be an object");
  for (const auto& [k, v] : s.items()) {
    if (!v.is_number()) throw UsageError(where + ": start value '" + k + "' must be a number");
    out[k] = v.get<double>();
  }
  return out;
}

}  // namespace detail

inline ModelConfig model_config_from_json(const Json& j, const std::string& source = "config") {
  if (!j.is_object()) throw UsageError(source + ": expected a JSON object");
  ModelConfig c;
  try {
    c.name = j.value("name", "");
    const Json& mean = detail::require(j, "mean", source);
    c.mean_formula = detail::require(mean, "formula", source + ".mean").get<std::string>();
    c.mean_link = parse_link(mean.value("link", "logit"));
    c.mean_start = detail::read_start(mean, source + ".mean");
    if (j.contains("precision")) {
      const Json& prec = j.at("precision");
      c.precision_formula = prec.value("formula", "");
      c.precision_link = parse_link(prec.value("link", "log"));
      c.precision_start = detail::read_start(prec, source + ".precision");
    }
    if (j.contains("fit")) {
      const Json& f = j.at("fit");
      c.fit.max_iterations = f.value("max_iterations", c.fit.max_iterations);
      c.fit.tol_loglik = f.value("tol_loglik", c.fit.tol_loglik);
      c.fit.tol_score = f.value("tol_score", c.fit.tol_score);
      c.fit.max_step_halvings = f.value("max_step_halvings", c.fit.max_step_halvings);
    }
    if (j.contains("data")) {
      const Json& d = j.at("data");
      c.data_path = d.value("path", "");
      c.response = d.value("response", "y");
      if (d.contains("covariates")) c.schema = d.at("covariates").get<std::vector<std::string>>();
    }
  } catch (const Json::exception& e) {
    throw UsageError(source + ": " + e.what());
  }
  if (!is_mean_link(c.mean_link))
    throw UsageError(source + ": link '" + std::string(link_name(c.mean_link)) +
                     "' is not a mean link");
  if (!is_precision_link(c.precision_link))
    throw UsageError(source + ": link '" + std::string(link_name(c.precision_link)) +
                     "' is not a precision link");
  return c;
}

inline ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
  return model_config_from_json(j, path);
}

// ---------------------------------------------------------------------------
// JSON reports

namespace detail {

inline Json to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Json named(const Eigen::VectorXd& v, char prefix) {
  Json o = Json::object();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    o[std::string(1, prefix) + std::to_string(i + 1)] = v[i];
  return o;
}

}  // namespace detail

inline Json metadata_json(const std::string& command) {
  return Json{{"tool", kToolName}, {"version", kToolVersion}, {"command", command}};
}

inline Json fit_to_json(const FitResult& f) {
  Json j;
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  j["n"] = f.n;
  j["mean"] = {{"formula", f.mean_formula},
               {"link", link_name(f.mean_link)},
               {"estimates", detail::named(f.beta, 'b')}};
  j["precision"] = {{"formula", f.precision_formula},
                    {"link", link_name(f.precision_link)},
                    {"estimates", detail::named(f.gamma, 'g')}};
  j["log_likelihood"] = f.log_lik;
  j["score_max_abs"] = f.score_norm;
  j["start"] = {{"beta", detail::to_json(f.start_beta)},
                {"gamma", detail::to_json(f.start_gamma)},
                {"log_likelihood", f.start_loglik}};
  j["warnings"] = f.warnings;
  j["fitted"] = {{"mu", detail::to_json(f.mu())}, {"phi", detail::to_json(f.phi())}};
  return j;
}

inline Json diagnostics_to_json(const DiagnosticsReport& d) {
  Json j;
  j["n"] = d.n;
  j["k1"] = d.k1;
  j["q1"] = d.q1;
  j["p"] = d.p;
  j["PRESS"] = d.press;
  j["PRESS_bg"] = d.press_combined;
  j["SST_deleted"] = d.sst_deleted;
  j["P2"] = d.p2;
  j["P2_c"] = d.p2_c;
  j["P2_bg"] = d.p2_bg;
  j["P2_bg_c"] = d.p2_bg_c;
  j["R2_FC"] = d.r2_fc;
  j["R2_FC_c"] = d.r2_fc_c;
  j["R2_LR"] = d.r2_lr;
  j["R2_LR_c"] = d.r2_lr_c;
  j["lambda"] = d.lambda;
  j["leverage_trace"] = d.leverage.sum();
  j["null_model"] = {{"log_likelihood", d.null_loglik}, {"converged", d.null_converged}};
  return j;
}

// Columns t, y, mu_hat, phi_hat, r_beta, r_beta_gamma, leverage,
// press_component, press_bg_component, flagged.
inline void write_observations_csv(std::ostream& out, const FitResult& f,
                                   const DiagnosticsReport& d) {
  const auto rows = press_plot_data(d.press_components_combined);
  out << "t,y,mu_hat,phi_hat,r_beta,r_beta_gamma,leverage,press_component,"
         "press_bg_component,flagged\n";
  for (std::size_t t = 0; t < d.n; ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    out << t + 1 << ',' << detail::shortest(f.y[i]) << ',' << detail::shortest(f.mu()[i])
        << ',' << detail::shortest(f.phi()[i]) << ',' << detail::shortest(d.r_beta[i]) << ','
        << detail::shortest(d.r_beta_gamma[i]) << ',' << detail::shortest(d.leverage[i]) << ','
        << detail::shortest(d.press_components[i]) << ','
        << detail::shortest(d.press_components_combined[i]) << ','
        << (rows[t].flagged ? 1 : 0) << '\n';
  }
}

inline void write_press_plot_csv(std::ostream& out, const std::vector<PressPlotRow>& rows) {
  out << "t,component,threshold,flagged\n";
  for (const auto& r : rows)
    out << r.t << ',' << detail::shortest(r.component) << ',' << detail::shortest(r.threshold)
        << ',' << (r.flagged ? 1 : 0) << '\n';
}

inline Json summary_to_json(const MonteCarloSummary& m) {
  Json j;
  j["scenario"] = m.scenario;
  j["mu_range"] = m.mu_range;
  j["estimated"] = m.estimated;
  j["n"] = m.n;
  j["level"] = m.level;
  j["replications"] = m.replications;
  j["seed"] = m.seed;
  j["design_seed"] = m.design_seed;
  j["excluded"] = m.excluded;
  j["true_lambda"] = m.true_lambda;
  j["true_mu"] = {{"mean", m.true_mu_mean}, {"min", m.true_mu_min}, {"max", m.true_mu_max}};
  Json stats = Json::object();
  for (const auto& [name, s] : m.statistics)
    stats[name] = {{"mean", s.mean}, {"median", s.median}, {"q1", s.q1}, {"q3", s.q3},
                   {"count", s.count}};
  j["statistics"] = stats;
  return j;
}

inline void write_replications_csv(std::ostream& out, const MonteCarloSummary& m) {
  out << "replication,converged";
  for (const auto& name : statistic_names()) out << ',' << name;
  out << ",error\n";
  for (const auto& r : m.rows) {
    out << r.index + 1 << ',' << (r.converged ? 1 : 0);
    for (std::size_t j = 0; j < statistic_names().size(); ++j)
      out << ',' << (r.converged ? detail::shortest(r.values[j]) : std::string());
    std::string e = r.error;
    for (char& c : e)
      if (c == ',' || c == '\n') c = ';';
    out << ',' << e << '\n';
  }
}

inline Json error_to_json(const Error& e) {
  Json j{{"error", {{"code", e.code()}, {"kind", ""}, {"message", e.what()}}}};
  switch (e.kind()) {
    case ErrorKind::usage: j["error"]["kind"] = "usage"; break;
    case ErrorKind::data: j["error"]["kind"] = "data"; break;
    case ErrorKind::numerical: j["error"]["kind"] = "numerical"; break;
  }
  return j;
}

inline int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::usage: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numerical: return 4;
  }
  return 1;
}

}  // namespace betareg
