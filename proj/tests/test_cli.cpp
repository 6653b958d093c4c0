#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "betareg/io.hpp"

using namespace betareg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path dir() {
  static const fs::path d = [] {
    fs::path p = fs::temp_directory_path() / "betareg_test_cli";
    fs::create_directories(p);
    return p;
  }();
  return d;
}

Outcome cli(const std::string& args) {
  const fs::path o = dir() / "stdout.txt", e = dir() / "stderr.txt";
  const std::string cmd = std::string("\"") + BETAREG_CLI + "\" " + args + " > \"" + o.string() +
                          "\" 2> \"" + e.string() + "\"";
  const int status = std::system(cmd.c_str());
  Outcome r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = dir() / name;
  std::ofstream(p) << text;
  return p;
}

// Deterministic data on a smooth curve with structured noise.
fs::path gas_like() {
  std::ostringstream s;
  s << "y,x1\n";
  for (int t = 0; t < 30; ++t) {
    const double x = 0.1 * t;
    const double eta = -0.6 - 0.3 * x + 0.25 * std::sin(3.7 * t);
    const double mu = std::exp(-std::exp(-eta));
    s << detail::shortest(mu) << ',' << detail::shortest(x) << '\n';
  }
  return write_file("gas_like.csv", s.str());
}

}  // namespace

TEST(Cli, FitPrintsJson) {
  const fs::path data = gas_like();
  const Outcome r = cli("fit --data " + data.string() +
                    " --response y --mean \"b1 + b2*x1\" --mean-link loglog --prec \"g1 + g2*x1\" "
                    "--prec-link log");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["metadata"]["command"], "fit");
  EXPECT_TRUE(j["fit"]["converged"].get<bool>());
  EXPECT_EQ(j["fit"]["mean"]["link"], "loglog");
  EXPECT_EQ(j["fit"]["precision"]["estimates"].size(), 2u);
}

TEST(Cli, ConfigAndOverrides) {
  const fs::path data = gas_like();
  const std::string cfg =
      (fs::path(BETAREG_CONFIGS) / "applications" / "gas_loglog_varying.json").string();
  const Outcome r = cli("diagnose --config " + cfg + " --data " + data.string() + " --csv " +
                    (dir() / "obs.csv").string());
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["metadata"]["command"], "diagnose");
  EXPECT_TRUE(j["diagnostics"].contains("P2_bg_c"));
  EXPECT_NEAR(j["diagnostics"]["leverage_trace"].get<double>(), 2.0, 1e-8);
  const std::string obs = slurp(dir() / "obs.csv");
  EXPECT_EQ(std::count(obs.begin(), obs.end(), '\n'), 31);
}

TEST(Cli, PressPlotTable) {
  const fs::path data = gas_like();
  const Outcome r = cli("press-plot --data " + data.string() + " --mean \"b1 + b2*x1\"");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("t,component,threshold,flagged\n", 0), 0u);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 31);
}

TEST(Cli, Reproducible) {
  const std::string args = "simulate --scenario s4 --n 40 --phi 150 --reps 20 --seed 7";
  const Outcome a = cli(args), b = cli(args + " --threads 3");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const Json j = Json::parse(a.out);
  EXPECT_EQ(j["summary"]["replications"], 20);
  EXPECT_EQ(j["summary"]["seed"], 7);

  const fs::path data = gas_like();
  const std::string fit_args = "fit --data " + data.string() + " --mean \"b1 + b2*x1\"";
  EXPECT_EQ(cli(fit_args).out, cli(fit_args).out);
}

TEST(Cli, SimulateDump) {
  const fs::path dump = dir() / "reps.csv";
  const Outcome r = cli("simulate --scenario s8 --lambda 50 --reps 5 --dump " + dump.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(dump);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("simulate --n 40").code, 2);
  EXPECT_EQ(cli("simulate --scenario s4 --phi 20 --lambda 20").code, 2);
  EXPECT_EQ(cli("simulate --scenario s5 --phi 20 --reps 2").code, 2);
  EXPECT_EQ(cli("simulate --scenario s99 --reps 2").code, 2);
  const fs::path data = gas_like();
  const Outcome r = cli("fit --data " + data.string() + " --mean \"b1 + * x1\"");
  EXPECT_EQ(r.code, 2);
  const Json e = Json::parse(r.err);
  EXPECT_EQ(e["error"]["code"], "parse_error");
  EXPECT_EQ(cli("fit --data " + data.string() + " --mean b1 --mean-link probit").code, 2);
}

TEST(Cli, DataErrorsExitThree) {
  const fs::path bad = write_file("boundary.csv", "y,x1\n0.2,1\n1.0,2\n0.4,3\n0.5,4\n");
  const Outcome r = cli("fit --data " + bad.string() + " --mean \"b1 + b2*x1\"");
  EXPECT_EQ(r.code, 3);
  const Json e = Json::parse(r.err);
  EXPECT_EQ(e["error"]["kind"], "data");
  EXPECT_NE(e["error"]["message"].get<std::string>().find("offending rows: 2"), std::string::npos);
  EXPECT_EQ(cli("fit --data /nonexistent.csv --mean b1").code, 3);
}

TEST(Cli, NumericalErrorsExitFour) {
  const fs::path neg = write_file("neg.csv", "y,x1\n0.2,-1\n0.3,2\n0.4,3\n0.5,4\n0.6,5\n");
  const Outcome r = cli("fit --data " + neg.string() + " --mean \"b1 + b2*log(x1)\"");
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_EQ(Json::parse(r.err)["error"]["kind"], "numerical");
}

TEST(Cli, NonConvergenceExitsZero) {
  const fs::path data = gas_like();
  const fs::path cfg = write_file(
      "short.json", R"({"mean": {"formula": "b1 + b2*x1", "link": "loglog"},
                        "precision": {"formula": "g1 + g2*x1"}, "fit": {"max_iterations": 1}})");
  const Outcome r = cli("diagnose --config " + cfg.string() + " --data " + data.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_FALSE(j["fit"]["converged"].get<bool>());
  EXPECT_TRUE(j["diagnostics"].is_null());
}

TEST(Cli, WritesOutFile) {
  const fs::path data = gas_like();
  const fs::path out = dir() / "fit.json";
  const Outcome r = cli("fit --data " + data.string() + " --mean \"b1 + b2*x1\" --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  EXPECT_TRUE(Json::parse(slurp(out))["fit"]["converged"].get<bool>());
}
