#pragma once

// Predictor formulas: parsing, printing, symbolic differentiation with
// respect to the parameters, and column-wise evaluation.
//
// Grammar (whitespace ignored):
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right associative
//   primary := number | parameter | covariate
//            | ('log' | 'exp' | 'sqrt') '(' expr ')' | '(' expr ')'
//
// '^' binds tighter than unary minus, so -x^2 is -(x^2). Parameters are the
// submodel prefix followed by a 1-based index (b1, b2, ... for the mean,
// g1, g2, ... for the precision) and must be contiguous.

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "betareg/error.hpp"

namespace betareg {

enum class NodeKind { constant, parameter, covariate, neg, log, exp, sqrt, add, sub, mul, div, pow };

class Expression {
 public:
  struct Node {
    NodeKind kind = NodeKind::constant;
    double value = 0.0;      // constant
    std::size_t index = 0;   // parameter index (0-based) or covariate slot
    std::string name;        // covariate name
    std::shared_ptr<const Node> lhs, rhs;
  };

  Expression() : node_(std::make_shared<Node>()) {}

  static Expression constant(double v) {
    auto n = std::make_shared<Node>();
    n->value = v;
    return Expression(std::move(n));
  }
  static Expression parameter(std::size_t index) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::parameter;
    n->index = index;
    return Expression(std::move(n));
  }
  static Expression covariate(std::string name, std::size_t slot) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::covariate;
    n->name = std::move(name);
    n->index = slot;
    return Expression(std::move(n));
  }
  // Raw constructors: no simplification.
  static Expression unary(NodeKind kind, const Expression& a) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->lhs = a.node_;
    return Expression(std::move(n));
  }
  static Expression binary(NodeKind kind, const Expression& a, const Expression& b) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->lhs = a.node_;
    n->rhs = b.node_;
    return Expression(std::move(n));
  }

  NodeKind kind() const noexcept { return node_->kind; }
  double value() const noexcept { return node_->value; }
  std::size_t index() const noexcept { return node_->index; }
  const std::string& name() const noexcept { return node_->name; }
  Expression lhs() const { return Expression(node_->lhs); }
  Expression rhs() const { return Expression(node_->rhs); }

  bool is_constant() const noexcept { return kind() == NodeKind::constant; }
  bool is_constant(double v) const noexcept { return is_constant() && value() == v; }
  bool is_unary() const noexcept {
    return kind() == NodeKind::neg || kind() == NodeKind::log || kind() == NodeKind::exp ||
           kind() == NodeKind::sqrt;
  }
  bool is_binary() const noexcept { return kind() >= NodeKind::add; }

  bool depends_on_parameters() const {
    if (kind() == NodeKind::parameter) return true;
    if (is_unary()) return lhs().depends_on_parameters();
    if (is_binary()) return lhs().depends_on_parameters() || rhs().depends_on_parameters();
    return false;
  }

  friend bool operator==(const Expression& a, const Expression& b) {
    if (a.node_ == b.node_) return true;
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
      case NodeKind::constant: return a.value() == b.value();
      case NodeKind::parameter: return a.index() == b.index();
      case NodeKind::covariate: return a.name() == b.name();
      default: break;
    }
    if (a.is_unary()) return a.lhs() == b.lhs();
    return a.lhs() == b.lhs() && a.rhs() == b.rhs();
  }

  // Parameters print as prefix + 1-based index (b1, g2, ...).
  std::string to_string(char prefix = 'b') const;

 private:
  explicit Expression(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

// ---------------------------------------------------------------------------
// Printing

namespace detail {

// Shortest round-trip decimal form.
inline std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_number(double v) {
  const std::string s = shortest(v);
  return v < 0.0 ? "(" + s + ")" : s;
}

inline int precedence(const Expression& e) {
  switch (e.kind()) {
    case NodeKind::add:
    case NodeKind::sub: return 1;
    case NodeKind::mul:
    case NodeKind::div: return 2;
    case NodeKind::neg: return 3;
    case NodeKind::pow: return 4;
    default: return 5;
  }
}

inline void print(const Expression& e, char prefix, std::string& out);

inline void print_child(const Expression& e, bool parens, char prefix, std::string& out) {
  if (parens) out += '(';
  print(e, prefix, out);
  if (parens) out += ')';
}

inline void print(const Expression& e, char prefix, std::string& out) {
  const int p = precedence(e);
  switch (e.kind()) {
    case NodeKind::constant: out += format_number(e.value()); return;
    case NodeKind::parameter: out += prefix + std::to_string(e.index() + 1); return;
    case NodeKind::covariate: out += e.name(); return;
    case NodeKind::neg:
      out += '-';
      print_child(e.lhs(), precedence(e.lhs()) < p, prefix, out);
      return;
    case NodeKind::log:
    case NodeKind::exp:
    case NodeKind::sqrt:
      out += e.kind() == NodeKind::log ? "log(" : e.kind() == NodeKind::exp ? "exp(" : "sqrt(";
      print(e.lhs(), prefix, out);
      out += ')';
      return;
    case NodeKind::pow:
      print_child(e.lhs(), precedence(e.lhs()) <= p, prefix, out);
      out += '^';
      print_child(e.rhs(), precedence(e.rhs()) < 5, prefix, out);
      return;
    default: break;
  }
  const char* op = e.kind() == NodeKind::add   ? " + "
                   : e.kind() == NodeKind::sub ? " - "
                   : e.kind() == NodeKind::mul ? "*"
                                               : "/";
  print_child(e.lhs(), precedence(e.lhs()) < p, prefix, out);
  out += op;
  const Expression r = e.rhs();
  print_child(r, precedence(r) <= p || r.kind() == NodeKind::neg, prefix, out);
}

}  // namespace detail

inline std::string Expression::to_string(char prefix) const {
  std::string out;
  detail::print(*this, prefix, out);
  return out;
}

// ---------------------------------------------------------------------------
// Simplifying constructors used by differentiation.

namespace expr {

inline Expression constant(double v) { return Expression::constant(v); }

inline Expression neg(const Expression& a) {
  if (a.is_constant()) return constant(-a.value());
  if (a.kind() == NodeKind::neg) return a.lhs();
  return Expression::unary(NodeKind::neg, a);
}

inline Expression add(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant()) return constant(a.value() + b.value());
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  if (b.kind() == NodeKind::neg) return Expression::binary(NodeKind::sub, a, b.lhs());
  return Expression::binary(NodeKind::add, a, b);
}

inline Expression sub(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant()) return constant(a.value() - b.value());
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return neg(b);
  return Expression::binary(NodeKind::sub, a, b);
}

inline Expression mul(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant()) return constant(a.value() * b.value());
  if (a.is_constant(0.0) || b.is_constant(0.0)) return constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return neg(b);
  if (b.is_constant(-1.0)) return neg(a);
  return Expression::binary(NodeKind::mul, a, b);
}

inline Expression div(const Expression& a, const Expression& b) {
  if (a.is_constant(0.0)) return constant(0.0);
  if (b.is_constant(1.0)) return a;
  if (a.is_constant() && b.is_constant() && b.value() != 0.0) return constant(a.value() / b.value());
  return Expression::binary(NodeKind::div, a, b);
}

inline Expression pow(const Expression& a, const Expression& b) {
  if (b.is_constant(1.0)) return a;
  if (b.is_constant(0.0)) return constant(1.0);
  return Expression::binary(NodeKind::pow, a, b);
}

inline Expression log(const Expression& a) { return Expression::unary(NodeKind::log, a); }
inline Expression exp(const Expression& a) { return Expression::unary(NodeKind::exp, a); }
inline Expression sqrt(const Expression& a) { return Expression::unary(NodeKind::sqrt, a); }

}  // namespace expr

// d e / d theta_index, simplified by constant folding.
inline Expression differentiate(const Expression& e, std::size_t index) {
  using namespace expr;
  switch (e.kind()) {
    case NodeKind::constant:
    case NodeKind::covariate: return constant(0.0);
    case NodeKind::parameter: return constant(e.index() == index ? 1.0 : 0.0);
    default: break;
  }
  const Expression a = e.lhs();
  const Expression da = differentiate(a, index);
  switch (e.kind()) {
    case NodeKind::neg: return neg(da);
    case NodeKind::log: return div(da, a);
    case NodeKind::exp: return mul(da, e);
    case NodeKind::sqrt: return div(da, mul(constant(2.0), e));
    default: break;
  }
  const Expression b = e.rhs();
  const Expression db = differentiate(b, index);
  switch (e.kind()) {
    case NodeKind::add: return add(da, db);
    case NodeKind::sub: return sub(da, db);
    case NodeKind::mul: return add(mul(da, b), mul(a, db));
    case NodeKind::div:
      if (db.is_constant(0.0)) return div(da, b);
      if (da.is_constant(0.0)) return div(neg(mul(a, db)), pow(b, constant(2.0)));
      return div(sub(mul(da, b), mul(a, db)), pow(b, constant(2.0)));
    case NodeKind::pow:
      if (db.is_constant(0.0)) {
        // b * a^(b-1) * da
        const Expression lowered = pow(a, sub(b, constant(1.0)));
        return mul(mul(b, lowered), da);
      }
      if (da.is_constant(0.0)) return mul(mul(e, log(a)), db);
      return mul(e, add(mul(db, log(a)), div(mul(b, da), a)));
    default: break;
  }
  return constant(0.0);
}

// ---------------------------------------------------------------------------
// Parsing

struct PredictorSpec {
  std::string text;
  char prefix = 'b';
  Expression expression;
  std::size_t param_count = 0;
  std::vector<std::string> covariate_names;  // slot order (first appearance)
  std::vector<Expression> derivatives;       // one per parameter
  bool linear = false;                       // Jacobian free of parameters

  // Number of distinct covariates referenced (k1 or q1).
  std::size_t covariate_count() const noexcept { return covariate_names.size(); }
  std::string to_string() const { return expression.to_string(prefix); }
};

namespace detail {

class FormulaParser {
 public:
  FormulaParser(std::string_view text, std::span<const std::string> schema, char prefix)
      : text_(text), schema_(schema.begin(), schema.end()), prefix_(prefix) {}

  PredictorSpec run() {
    PredictorSpec spec;
    spec.text = std::string(text_);
    spec.prefix = prefix_;
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("empty formula", pos_);
    spec.expression = parse_expr();
    skip_ws();
    if (pos_ < text_.size())
      throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    if (max_param_ == 0) throw ParseError("formula has no parameters", 0);
    for (std::size_t i = 0; i < max_param_; ++i)
      if (!seen_[i])
        throw ParseError(std::string("parameter-index gap: ") + prefix_ + std::to_string(i + 1) +
                             " is missing",
                         0);
    spec.param_count = max_param_;
    spec.covariate_names = covariates_;
    spec.linear = true;
    for (std::size_t i = 0; i < max_param_; ++i) {
      spec.derivatives.push_back(differentiate(spec.expression, i));
      if (spec.derivatives.back().depends_on_parameters()) spec.linear = false;
    }
    return spec;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) {
      const std::string got = pos_ < text_.size() ? std::string(1, text_[pos_]) : "end of input";
      throw ParseError(std::string("expected '") + c + "' but found " + got, pos_);
    }
  }

  Expression parse_expr() {
    Expression lhs = parse_term();
    for (;;) {
      if (accept('+'))
        lhs = Expression::binary(NodeKind::add, lhs, parse_term());
      else if (accept('-'))
        lhs = Expression::binary(NodeKind::sub, lhs, parse_term());
      else
        return lhs;
    }
  }

  Expression parse_term() {
    Expression lhs = parse_unary();
    for (;;) {
      if (accept('*'))
        lhs = Expression::binary(NodeKind::mul, lhs, parse_unary());
      else if (accept('/'))
        lhs = Expression::binary(NodeKind::div, lhs, parse_unary());
      else
        return lhs;
    }
  }

  Expression parse_unary() {
    if (accept('-')) {
      Expression operand = parse_unary();
      // a minus sign on a bare literal is part of the number
      if (operand.is_constant() && !std::signbit(operand.value()) && last_was_literal_)
        return Expression::constant(-operand.value());
      last_was_literal_ = false;
      return Expression::unary(NodeKind::neg, operand);
    }
    return parse_power();
  }

  Expression parse_power() {
    Expression base = parse_primary();
    if (accept('^')) {
      Expression exponent = parse_unary();
      last_was_literal_ = false;
      return Expression::binary(NodeKind::pow, base, exponent);
    }
    return base;
  }

  Expression parse_primary() {
    skip_ws();
    last_was_literal_ = false;
    if (pos_ >= text_.size()) throw ParseError("unexpected end of formula", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expression inner = parse_expr();
      expect(')');
      last_was_literal_ = inner.is_constant();
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  Expression parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
        digits();
      else
        pos_ = save;
    }
    double v = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_)
      throw ParseError("malformed number", start);
    last_was_literal_ = true;
    return Expression::constant(v);
  }

  Expression parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string id(text_.substr(start, pos_ - start));
    if (id == "log" || id == "exp" || id == "sqrt") {
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != '(')
        throw ParseError("function '" + id + "' must be followed by '('", pos_);
      ++pos_;
      Expression arg = parse_expr();
      expect(')');
      last_was_literal_ = false;
      const NodeKind k = id == "log" ? NodeKind::log : id == "exp" ? NodeKind::exp : NodeKind::sqrt;
      return Expression::unary(k, arg);
    }
    const bool in_schema = std::find(schema_.begin(), schema_.end(), id) != schema_.end();
    if (is_parameter_token(id)) {
      if (in_schema)
        throw ParseError("identifier '" + id + "' is both a parameter and a covariate", start);
      std::size_t idx = 0;
      std::from_chars(id.data() + 1, id.data() + id.size(), idx);
      if (idx == 0) throw ParseError("parameter indices start at 1", start);
      if (idx > max_param_) {
        max_param_ = idx;
        seen_.resize(idx, false);
      }
      seen_[idx - 1] = true;
      return Expression::parameter(idx - 1);
    }
    if (!in_schema) throw ParseError("unknown covariate '" + id + "'", start);
    auto it = std::find(covariates_.begin(), covariates_.end(), id);
    const std::size_t slot = static_cast<std::size_t>(it - covariates_.begin());
    if (it == covariates_.end()) covariates_.push_back(id);
    return Expression::covariate(id, slot);
  }

  bool is_parameter_token(const std::string& id) const {
    if (id.size() < 2 || id[0] != prefix_) return false;
    if (id[1] == '0') return false;
    return std::all_of(id.begin() + 1, id.end(),
                       [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); });
  }

  std::string_view text_;
  std::vector<std::string> schema_;
  char prefix_;
  std::size_t pos_ = 0;
  std::size_t max_param_ = 0;
  std::vector<bool> seen_;
  std::vector<std::string> covariates_;
  bool last_was_literal_ = false;
};

}  // namespace detail

inline PredictorSpec parse_formula(std::string_view text, std::span<const std::string> schema,
                                   char prefix = 'b') {
  return detail::FormulaParser(text, schema, prefix).run();
}

inline PredictorSpec parse_formula(std::string_view text, const std::vector<std::string>& schema,
                                   char prefix = 'b') {
  return parse_formula(text, std::span<const std::string>(schema), prefix);
}

inline Expression differentiate(const PredictorSpec& spec, std::size_t param_index) {
  if (param_index >= spec.param_count)
    throw UsageError("parameter index " + std::to_string(param_index + 1) + " out of range");
  return differentiate(spec.expression, param_index);
}

// Intercept-only predictor ("b1" or "g1").
inline PredictorSpec intercept_only(char prefix) {
  return parse_formula(std::string(1, prefix) + "1", std::vector<std::string>{}, prefix);
}

// ---------------------------------------------------------------------------
// Evaluation

// Covariate values for one predictor: column j holds the covariate in slot j.
using CovariateBlock = Eigen::ArrayXXd;

namespace detail {

template <typename Pred>
void fail_at(Eigen::Index n, const Expression& e, char prefix, const char* what, Pred bad) {
  for (Eigen::Index t = 0; t < n; ++t)
    if (bad(t)) throw EvalDomainError(what, e.to_string(prefix), static_cast<std::size_t>(t));
}

inline Eigen::ArrayXd evaluate(const Expression& e, std::span<const double> params,
                               const CovariateBlock& cov, Eigen::Index n, char prefix) {
  using Eigen::ArrayXd;
  switch (e.kind()) {
    case NodeKind::constant: return ArrayXd::Constant(n, e.value());
    case NodeKind::parameter: return ArrayXd::Constant(n, params[e.index()]);
    case NodeKind::covariate: return cov.col(static_cast<Eigen::Index>(e.index()));
    default: break;
  }
  ArrayXd a = evaluate(e.lhs(), params, cov, n, prefix);
  ArrayXd out;
  switch (e.kind()) {
    case NodeKind::neg: out = -a; break;
    case NodeKind::log:
      fail_at(n, e, prefix, "log of non-positive value", [&](Eigen::Index t) { return !(a[t] > 0.0); });
      out = a.log();
      break;
    case NodeKind::exp: out = a.exp(); break;
    case NodeKind::sqrt:
      fail_at(n, e, prefix, "sqrt of negative value", [&](Eigen::Index t) { return !(a[t] >= 0.0); });
      out = a.sqrt();
      break;
    default: {
      ArrayXd b = evaluate(e.rhs(), params, cov, n, prefix);
      switch (e.kind()) {
        case NodeKind::add: out = a + b; break;
        case NodeKind::sub: out = a - b; break;
        case NodeKind::mul: out = a * b; break;
        case NodeKind::div:
          fail_at(n, e, prefix, "division by zero", [&](Eigen::Index t) { return b[t] == 0.0; });
          out = a / b;
          break;
        case NodeKind::pow:
          fail_at(n, e, prefix, "power of negative base with non-integer exponent", [&](Eigen::Index t) {
            return a[t] < 0.0 && b[t] != std::round(b[t]);
          });
          fail_at(n, e, prefix, "zero base with non-positive exponent",
                  [&](Eigen::Index t) { return a[t] == 0.0 && b[t] <= 0.0; });
          out = ArrayXd(n);
          for (Eigen::Index t = 0; t < n; ++t) out[t] = std::pow(a[t], b[t]);
          break;
        default: break;
      }
    }
  }
  fail_at(n, e, prefix, "non-finite value", [&](Eigen::Index t) { return !std::isfinite(out[t]); });
  return out;
}

inline void check_params(const PredictorSpec& spec, std::span<const double> params) {
  if (params.size() != spec.param_count)
    throw UsageError("expected " + std::to_string(spec.param_count) + " parameters, got " +
                     std::to_string(params.size()));
}

}  // namespace detail

// Predictor values for every row of `cov`.
inline Eigen::ArrayXd eval_predictor(const PredictorSpec& spec, std::span<const double> params,
                                     const CovariateBlock& cov) {
  detail::check_params(spec, params);
  return detail::evaluate(spec.expression, params, cov, cov.rows(), spec.prefix);
}

// n x param_count Jacobian of the predictor.
inline Eigen::MatrixXd eval_jacobian(const PredictorSpec& spec, std::span<const double> params,
                                     const CovariateBlock& cov) {
  detail::check_params(spec, params);
  Eigen::MatrixXd J(cov.rows(), static_cast<Eigen::Index>(spec.param_count));
  for (std::size_t j = 0; j < spec.param_count; ++j)
    J.col(static_cast<Eigen::Index>(j)) =
        detail::evaluate(spec.derivatives[j], params, cov, cov.rows(), spec.prefix).matrix();
  return J;
}

// Single-row forms; `row` is aligned with spec.covariate_names.
inline double eval_predictor(const PredictorSpec& spec, std::span<const double> params,
                             std::span<const double> row) {
  CovariateBlock cov(1, static_cast<Eigen::Index>(spec.covariate_count()));
  if (row.size() != spec.covariate_count())
    throw UsageError("covariate row has wrong length");
  for (std::size_t j = 0; j < row.size(); ++j) cov(0, static_cast<Eigen::Index>(j)) = row[j];
  return eval_predictor(spec, params, cov)[0];
}

inline std::vector<double> eval_jacobian_row(const PredictorSpec& spec,
                                             std::span<const double> params,
                                             std::span<const double> row) {
  CovariateBlock cov(1, static_cast<Eigen::Index>(spec.covariate_count()));
  if (row.size() != spec.covariate_count())
    throw UsageError("covariate row has wrong length");
  for (std::size_t j = 0; j < row.size(); ++j) cov(0, static_cast<Eigen::Index>(j)) = row[j];
  const Eigen::MatrixXd J = eval_jacobian(spec, params, cov);
  return std::vector<double>(J.data(), J.data() + J.size());
}

}  // namespace betareg
