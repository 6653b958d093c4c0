#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "betareg/formula.hpp"
#include "betareg/random.hpp"

using namespace betareg;

namespace {

const std::vector<std::string> kSchema = {"x1", "x2", "x3", "x4", "x5", "z", "x"};

double eval_at(const PredictorSpec& s, const std::vector<double>& p, const std::vector<double>& row) {
  return eval_predictor(s, p, row);
}

}  // namespace

TEST(Parse, LinearPredictor) {
  const auto s = parse_formula("b1 + b2*x2 + b3*x3", kSchema);
  EXPECT_EQ(s.param_count, 3u);
  EXPECT_EQ(s.covariate_names, (std::vector<std::string>{"x2", "x3"}));
  EXPECT_TRUE(s.linear);
  EXPECT_EQ(s.to_string(), "b1 + b2*x2 + b3*x3");
}

TEST(Parse, NonlinearMeanPredictor) {
  const auto s = parse_formula("b1 + x2^b2 + b3*log(x3 - b4) + x3/b5", kSchema);
  EXPECT_EQ(s.param_count, 5u);
  EXPECT_EQ(s.covariate_count(), 2u);
  EXPECT_FALSE(s.linear);
  const std::vector<double> p = {1, 1.9, -2, 3.4, 7.2};
  const std::vector<double> row = {1.5, 10.0};
  const double want = 1 + std::pow(1.5, 1.9) - 2 * std::log(10 - 3.4) + 10 / 7.2;
  EXPECT_NEAR(eval_at(s, p, row), want, 1e-14);
}

TEST(Parse, ExponentialDecayPredictors) {
  const auto s = parse_formula("b1 + (0.49 - b1)*exp(b2*(x1 - 8))", kSchema);
  EXPECT_EQ(s.param_count, 2u);
  EXPECT_FALSE(s.linear);
  EXPECT_NEAR(eval_at(s, {0.39, -0.1}, {8.0}), 0.49, 1e-15);
  EXPECT_NEAR(eval_at(s, {0.39, -0.1}, {18.0}), 0.39 + 0.1 * std::exp(-1.0), 1e-15);

  const auto v = parse_formula("b1 + (b3 - b1)*exp(b2*(x1 - 8))", kSchema);
  EXPECT_EQ(v.param_count, 3u);
  EXPECT_NEAR(eval_at(v, {0.3, 0.02, 0.5}, {8.0}), 0.5, 1e-15);
}

TEST(Parse, PrecisionPrefix) {
  const auto s = parse_formula("g1 + g2*x1 + g3*x1*x2", kSchema, 'g');
  EXPECT_EQ(s.param_count, 3u);
  EXPECT_EQ(s.prefix, 'g');
  EXPECT_TRUE(s.linear);
  EXPECT_THROW(parse_formula("g1 + b2*x1", kSchema, 'g'), ParseError);
  const auto io = intercept_only('g');
  EXPECT_EQ(io.param_count, 1u);
  EXPECT_EQ(io.to_string(), "g1");
}

TEST(Parse, OperatorPrecedence) {
  const auto s = parse_formula("b1 - b2 - x1 * 2 ^ 3 / 4", kSchema);
  EXPECT_NEAR(eval_at(s, {10, 1}, {3.0}), 10 - 1 - 3 * 8.0 / 4, 1e-14);
  const auto u = parse_formula("-b1^2", kSchema);
  EXPECT_NEAR(eval_at(u, {3}, {}), -9.0, 1e-14);
  const auto r = parse_formula("b1*2^-1", kSchema);
  EXPECT_NEAR(eval_at(r, {3}, {}), 1.5, 1e-14);
}

TEST(Parse, NumberForms) {
  const auto s = parse_formula("b1 + 1.5e-1 + .5 + 2.", kSchema);
  EXPECT_NEAR(eval_at(s, {0}, {}), 2.65, 1e-14);
}

TEST(ParseErrors, ReportOffset) {
  try {
    parse_formula("b1 + * x1", kSchema);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset, 5u);
  }
  try {
    parse_formula("b1 + b2*x9", kSchema);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset, 8u);
    EXPECT_NE(std::string(e.what()).find("x9"), std::string::npos);
  }
}

TEST(ParseErrors, Rejections) {
  EXPECT_THROW(parse_formula("", kSchema), ParseError);
  EXPECT_THROW(parse_formula("   ", kSchema), ParseError);
  EXPECT_THROW(parse_formula("b1 + b3*x1", kSchema), ParseError);  // b2 missing
  EXPECT_THROW(parse_formula("b0 + b1*x1", kSchema), ParseError);
  EXPECT_THROW(parse_formula("x1 + 2", kSchema), ParseError);
  EXPECT_THROW(parse_formula("b1 + (b2*x1", kSchema), ParseError);
  EXPECT_THROW(parse_formula("b1 + b2*x1)", kSchema), ParseError);
  EXPECT_THROW(parse_formula("log b1", kSchema), ParseError);
  EXPECT_THROW(parse_formula("b1 + sin(x1)", kSchema), ParseError);
  EXPECT_THROW(parse_formula("b1 $ x1", kSchema), ParseError);
  EXPECT_THROW(parse_formula("b1 + b2", std::vector<std::string>{"b2"}), ParseError);
}

TEST(Derivatives, PrintedForms) {
  const auto s = parse_formula("b1 + x2^b2 + b3*log(x3 - b4) + x3/b5", kSchema);
  EXPECT_EQ(s.derivatives[0].to_string('b'), "1");
  EXPECT_EQ(s.derivatives[1].to_string('b'), "x2^b2*log(x2)");
  EXPECT_EQ(s.derivatives[2].to_string('b'), "log(x3 - b4)");
  EXPECT_EQ(s.derivatives[4].to_string('b'), "-x3/b5^2");
}

TEST(Derivatives, LinearJacobianIgnoresParameters) {
  const auto s = parse_formula("b1 + b2*x1 + b3*x2*x1", kSchema);
  ASSERT_TRUE(s.linear);
  CovariateBlock cov(3, 2);
  cov << 1, 2, 3, 4, 5, 6;
  const std::vector<double> p1 = {0, 0, 0}, p2 = {5, -1, 3};
  EXPECT_TRUE(eval_jacobian(s, p1, cov).isApprox(eval_jacobian(s, p2, cov)));
  const Eigen::MatrixXd J = eval_jacobian(s, p2, cov);
  EXPECT_DOUBLE_EQ(J(2, 2), 30.0);
}

TEST(Derivatives, MatchFiniteDifferences) {
  const std::vector<std::string> formulas = {
      "b1 + x2^b2 + b3*log(x3 - b4) + x3/b5",
      "b1 + (0.49 - b1)*exp(b2*(x1 - 8))",
      "b1 + (b3 - b1)*exp(b2*(x1 - 8))",
      "b1*x1/(b2 + x1)",
      "sqrt(b1 + b2*x1^2) - b3",
      "exp(-b1*x1)*b2 + b3^2",
      "b1 + x^b2",
      "log(b1*x1 + b2*x2) + b3/x2",
  };
  RandomStream rs(77);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto& f = formulas[static_cast<std::size_t>(trial) % formulas.size()];
    const auto s = parse_formula(f, kSchema);
    std::vector<double> p(s.param_count), row(s.covariate_count());
    for (auto& v : p) v = rs.uniform(0.5, 2.0);
    for (auto& v : row) v = rs.uniform(4.5, 30.0);
    const auto J = eval_jacobian_row(s, p, row);
    for (std::size_t i = 0; i < s.param_count; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(p[i]));
      auto up = p, dn = p;
      up[i] += h;
      dn[i] -= h;
      const double fd = (eval_at(s, up, row) - eval_at(s, dn, row)) / (2 * h);
      const double tol = 1e-6 * std::max(1.0, std::abs(J[i]));
      EXPECT_NEAR(J[i], fd, tol) << f << " param " << i + 1;
    }
    ++checked;
  }
  EXPECT_EQ(checked, 1000);
}

TEST(Printing, RoundTripPreservesValues) {
  const std::vector<std::string> formulas = {
      "b1 + x2^b2 + b3*log(x3 - b4) + x3/b5",
      "b1 + (0.49 - b1)*exp(b2*(x1 - 8))",
      "b1 - (b2 - x1) - -0.25*b3",
      "b1/(b2/x1)/x2",
      "(b1 + b2)^(x1 - 1)",
      "-b1^2 + sqrt(x1)*1e-3",
  };
  RandomStream rs(5);
  for (const auto& f : formulas) {
    const auto s = parse_formula(f, kSchema);
    const std::string printed = s.to_string();
    const auto back = parse_formula(printed, kSchema);
    EXPECT_EQ(back.to_string(), printed) << f;
    EXPECT_TRUE(back.expression == s.expression) << f << " -> " << printed;
    for (int k = 0; k < 20; ++k) {
      std::vector<double> p(s.param_count);
      for (auto& v : p) v = rs.uniform(0.5, 2.0);
      CovariateBlock cov(1, static_cast<Eigen::Index>(s.covariate_count()));
      for (Eigen::Index j = 0; j < cov.cols(); ++j) cov(0, j) = rs.uniform(4.5, 6.0);
      CovariateBlock cov_back(1, cov.cols());
      for (std::size_t j = 0; j < back.covariate_count(); ++j) {
        const auto it = std::find(s.covariate_names.begin(), s.covariate_names.end(),
                                  back.covariate_names[j]);
        cov_back(0, static_cast<Eigen::Index>(j)) = cov(0, it - s.covariate_names.begin());
      }
      EXPECT_DOUBLE_EQ(eval_predictor(back, p, cov_back)[0], eval_predictor(s, p, cov)[0]) << f;
    }
  }
}

TEST(Evaluation, DomainErrorNamesSubexpressionAndRow) {
  const auto s = parse_formula("b1 + b3*log(x3 - b2)", kSchema);
  CovariateBlock cov(3, 1);
  cov << 10.0, 2.0, 12.0;
  const std::vector<double> p = {1.0, 3.0, 1.0};
  try {
    eval_predictor(s, p, cov);
    FAIL() << "expected EvalDomainError";
  } catch (const EvalDomainError& e) {
    EXPECT_EQ(e.row, 1u);
    EXPECT_EQ(e.subexpression, "log(x3 - b2)");
  }
}

TEST(Evaluation, DivisionByZero) {
  const auto s = parse_formula("b1/x1", kSchema);
  CovariateBlock cov(2, 1);
  cov << 1.0, 0.0;
  EXPECT_THROW(eval_predictor(s, std::vector<double>{1.0}, cov), EvalDomainError);
}

TEST(Evaluation, WrongParameterCount) {
  const auto s = parse_formula("b1 + b2*x1", kSchema);
  CovariateBlock cov(1, 1);
  cov << 1.0;
  EXPECT_THROW(eval_predictor(s, std::vector<double>{1.0}, cov), UsageError);
}
