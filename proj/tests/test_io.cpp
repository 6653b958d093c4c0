#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "betareg/io.hpp"

using namespace betareg;
namespace fs = std::filesystem;

namespace {

Dataset parse(const std::string& text, const std::string& response = "y") {
  std::istringstream in(text);
  return dataset_from_table(read_csv(in, "mem.csv"), response, "mem.csv");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "betareg_test_io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Csv, LoadsSmallFile) {
  const Dataset d = parse("y,x\n0.2,1\n0.5,2\n0.8,3\n");
  EXPECT_EQ(d.n(), 3u);
  EXPECT_EQ(d.names, std::vector<std::string>{"x"});
  EXPECT_DOUBLE_EQ(d.response[1], 0.5);
  EXPECT_DOUBLE_EQ(d.column("x")[2], 3.0);
}

TEST(Csv, ResponseColumnAnywhere) {
  const Dataset d = parse("x1,resp,x2\n1,0.3,4\n2,0.6,5\n", "resp");
  EXPECT_EQ(d.names, (std::vector<std::string>{"x1", "x2"}));
  EXPECT_DOUBLE_EQ(d.response[0], 0.3);
}

TEST(Csv, QuotedFieldsBlankLinesAndCrlf) {
  const Dataset d = parse("\"y\",\"x\"\r\n\r\n\" 0.25 \",1e-3\r\n0.75,-2\r\n");
  EXPECT_EQ(d.n(), 2u);
  EXPECT_DOUBLE_EQ(d.response[0], 0.25);
  EXPECT_DOUBLE_EQ(d.column("x")[0], 1e-3);
}

TEST(Csv, BoundaryResponseRejectedWithRow) {
  EXPECT_EQ(error_of("y,x\n0.2,1\n1.0,2\n0.4,3\n"),
            "mem.csv: response must lie strictly inside (0,1); offending rows: 2");
  EXPECT_EQ(error_of("y,x\n0,1\n0.5,2\n0.0,3\n"),
            "mem.csv: response must lie strictly inside (0,1); offending rows: 1, 3");
}

TEST(Csv, ParseErrorsNameRowAndColumn) {
  const std::string bad = error_of("y,x\n0.2,1\n0.5,abc\n");
  EXPECT_NE(bad.find("row 2"), std::string::npos) << bad;
  EXPECT_NE(bad.find("column 2"), std::string::npos) << bad;
  EXPECT_NE(bad.find("abc"), std::string::npos) << bad;
  EXPECT_NE(error_of("y,x\n0.2,\n").find("missing value"), std::string::npos);
  EXPECT_NE(error_of("y,x\n0.2,1,3\n").find("3 fields"), std::string::npos);
  EXPECT_NE(error_of("y,y\n0.2,0.3\n").find("duplicate"), std::string::npos);
  EXPECT_NE(error_of("").find("header"), std::string::npos);
  EXPECT_NE(error_of("y,x\n").find("empty"), std::string::npos);
  EXPECT_THROW(parse("a,b\n0.5,1\n"), DataError);
  EXPECT_THROW(load_csv("/nonexistent/file.csv", "y"), DataError);
}

TEST(Csv, RejectsNonFiniteValues) {
  EXPECT_THROW(parse("y,x\n0.2,nan\n0.4,1\n"), DataError);
  EXPECT_THROW(parse("y,x\n0.2,inf\n0.4,1\n"), DataError);
}

TEST(Csv, RoundTripFullPrecision) {
  Dataset d;
  d.response = Eigen::VectorXd{{0.1, 1.0 / 3.0, 0.9999999999999999, 5e-324 + 1e-300}};
  d.add_column("x", Eigen::VectorXd{{-1e-17, 3.141592653589793, 1e300, 0.1 + 0.2}});
  const fs::path p = scratch("roundtrip.csv");
  write_csv(p.string(), d, "y");
  const Dataset back = load_csv(p.string(), "y");
  EXPECT_EQ(back.response, d.response);
  EXPECT_EQ(back.column("x"), d.column("x"));
}

TEST(Config, ParsesFullConfig) {
  const Json j = Json::parse(R"json({
    "name": "demo",
    "mean": {"formula": "b1 + (b3 - b1)*exp(b2*(x1 - 8))", "link": "loglog",
             "start": {"b1": 0.3, "b2": 0.02}},
    "precision": {"formula": "g1 + g2*x1", "link": "sqrt", "start": {"g2": 0.5}},
    "fit": {"max_iterations": 50, "tol_score": 1e-6},
    "data": {"path": "d.csv", "response": "frac", "covariates": ["x1"]}
  })json");
  const ModelConfig c = model_config_from_json(j);
  EXPECT_EQ(c.name, "demo");
  EXPECT_EQ(c.mean_link, LinkKind::loglog);
  EXPECT_EQ(c.precision_link, LinkKind::sqrt);
  EXPECT_EQ(c.fit.max_iterations, 50);
  EXPECT_DOUBLE_EQ(c.fit.tol_score, 1e-6);
  EXPECT_DOUBLE_EQ(c.fit.tol_loglik, 1e-10);
  EXPECT_EQ(c.response, "frac");
  EXPECT_EQ(c.schema, std::vector<std::string>{"x1"});
  const ModelSpec m = c.bind({"x1"});
  ASSERT_EQ(m.mean_start.size(), 3u);
  EXPECT_EQ(m.mean_start[0], 0.3);
  EXPECT_EQ(m.mean_start[1], 0.02);
  EXPECT_FALSE(m.mean_start[2].has_value());
  EXPECT_EQ(m.precision_start[1], 0.5);
}

TEST(Config, Defaults) {
  const ModelConfig c = model_config_from_json(Json::parse(R"({"mean": {"formula": "b1"}})"));
  EXPECT_EQ(c.mean_link, LinkKind::logit);
  EXPECT_EQ(c.precision_link, LinkKind::log);
  EXPECT_TRUE(c.precision_formula.empty());
  EXPECT_EQ(c.bind({}).q(), 1u);
}

TEST(Config, Rejections) {
  auto bad = [](const char* text) { return model_config_from_json(Json::parse(text)); };
  EXPECT_THROW(bad(R"({"precision": {"formula": "g1"}})"), UsageError);
  EXPECT_THROW(bad(R"({"mean": {"formula": "b1", "link": "log"}})"), UsageError);
  EXPECT_THROW(bad(R"({"mean": {"formula": "b1", "link": "probit"}})"), UsageError);
  EXPECT_THROW(bad(R"({"mean": {"formula": "b1"}, "precision": {"link": "logit"}})"), UsageError);
  EXPECT_THROW(bad(R"({"mean": {"formula": 3}})"), UsageError);
  EXPECT_THROW(bad(R"({"mean": {"formula": "b1", "start": {"b1": "x"}}})"), UsageError);
  EXPECT_THROW(bad(R"([1, 2])"), UsageError);
  const ModelConfig c = bad(R"({"mean": {"formula": "b1 + b2*x", "start": {"b7": 1}}})");
  EXPECT_THROW(c.bind({"x"}), UsageError);
  EXPECT_THROW(c.bind({"z"}), ParseError);
  EXPECT_THROW(load_model_config("/nonexistent.json"), UsageError);
}

TEST(Config, ShippedApplicationConfigsParse) {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(BETAREG_CONFIGS) / "applications")) {
    if (entry.path().extension() != ".json") continue;
    const ModelConfig c = load_model_config(entry.path().string());
    EXPECT_FALSE(c.schema.empty()) << entry.path();
    EXPECT_NO_THROW(c.bind(c.schema)) << entry.path();
    ++count;
  }
  EXPECT_GE(count, 10);
}

TEST(Reports, StableJson) {
  Dataset d = parse("y,x\n0.21,1\n0.35,2\n0.52,3\n0.48,4\n0.66,5\n0.7,6\n0.59,7\n0.81,8\n");
  const ModelSpec m = make_model("b1 + b2*x", LinkKind::logit, "", LinkKind::log, d.schema());
  const FitResult f = fit(m, d);
  const DiagnosticsReport r = diagnose(f, m, d);
  const std::string a = fit_to_json(f).dump(2) + diagnostics_to_json(r).dump(2);
  const FitResult f2 = fit(m, d);
  const std::string b = fit_to_json(f2).dump(2) + diagnostics_to_json(diagnose(f2, m, d)).dump(2);
  EXPECT_EQ(a, b);
  const Json j = fit_to_json(f);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys.front(), "converged");
  EXPECT_EQ(j["mean"]["estimates"].size(), 2u);
  EXPECT_TRUE(j["mean"]["estimates"].contains("b2"));
  EXPECT_EQ(metadata_json("fit")["tool"], "betareg");
  EXPECT_FALSE(metadata_json("fit").contains("timestamp"));
}

TEST(Reports, ObservationTable) {
  Dataset d = parse("y,x\n0.21,1\n0.35,2\n0.52,3\n0.48,4\n0.66,5\n0.7,6\n0.59,7\n0.81,8\n");
  const ModelSpec m = make_model("b1 + b2*x", LinkKind::logit, "", LinkKind::log, d.schema());
  const FitResult f = fit(m, d);
  std::ostringstream out;
  write_observations_csv(out, f, diagnose(f, m, d));
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line,
            "t,y,mu_hat,phi_hat,r_beta,r_beta_gamma,leverage,press_component,press_bg_component,flagged");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 8);
}

TEST(Reports, PressPlotAllZero) {
  std::ostringstream out;
  write_press_plot_csv(out, press_plot_data(Eigen::VectorXd::Zero(3)));
  EXPECT_EQ(out.str(), "t,component,threshold,flagged\n1,0,0,0\n2,0,0,0\n3,0,0,0\n");
}

TEST(Reports, ReplicationTable) {
  MonteCarloSummary m;
  m.rows = {{0, true, "", std::vector<double>(statistic_names().size(), 0.5)},
            {1, false, "singular_information: bad, very bad", {}}};
  aggregate(m);
  std::ostringstream out;
  write_replications_csv(out, m);
  std::istringstream in(out.str());
  std::string header, r1, r2;
  std::getline(in, header);
  std::getline(in, r1);
  std::getline(in, r2);
  EXPECT_EQ(header, "replication,converged,P2,P2_c,P2_bg,P2_bg_c,R2_FC,R2_FC_c,R2_LR,R2_LR_c,lambda_hat,error");
  EXPECT_EQ(r1, "1,1,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,");
  EXPECT_EQ(r2, "2,0,,,,,,,,,,singular_information: bad; very bad");
  const Json s = summary_to_json(m);
  EXPECT_EQ(s["excluded"], 1);
  EXPECT_DOUBLE_EQ(s["statistics"]["P2"]["mean"].get<double>(), 0.5);
}

TEST(Errors, ExitCodesByKind) {
  EXPECT_EQ(exit_code(UsageError("x")), 2);
  EXPECT_EQ(exit_code(ParseError("x", 0)), 2);
  EXPECT_EQ(exit_code(DataError("x")), 3);
  EXPECT_EQ(exit_code(DomainError("x")), 4);
  EXPECT_EQ(exit_code(SingularInformation("x")), 4);
  EXPECT_EQ(exit_code(UnitLeverage(3)), 4);
  const Json j = error_to_json(DataError("bad row"));
  EXPECT_EQ(j["error"]["kind"], "data");
  EXPECT_EQ(j["error"]["code"], "data_error");
}
