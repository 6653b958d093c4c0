#pragma once

#include <stdexcept>
#include <string>

namespace betareg {

// Broad failure classes; the CLI maps them onto exit codes.
enum class ErrorKind {
  usage,      // bad flags or configuration
  data,       // unreadable or out-of-support input
  numerical,  // domain, singularity, inadmissible parameters
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Short machine-readable tag such as "domain_error" or "singular_information".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

struct DomainError : Error {
  explicit DomainError(const std::string& msg) : Error(ErrorKind::numerical, "domain_error", msg) {}
};

struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t offset)
      : Error(ErrorKind::usage, "parse_error", msg + " (at byte " + std::to_string(offset) + ")"),
        offset(offset) {}
  std::size_t offset;
};

// Predictor evaluation left its domain, e.g. log of a non-positive argument.
struct EvalDomainError : Error {
  EvalDomainError(const std::string& msg, std::string subexpr, std::size_t row)
      : Error(ErrorKind::numerical, "evaluation_domain_error",
              msg + " in '" + subexpr + "' at observation " + std::to_string(row + 1)),
        subexpression(std::move(subexpr)),
        row(row) {}
  std::string subexpression;
  std::size_t row;  // zero-based
};

struct InadmissibleParameter : Error {
  InadmissibleParameter(const std::string& msg, std::size_t row)
      : Error(ErrorKind::numerical, "inadmissible_parameter",
              msg + " at observation " + std::to_string(row + 1)),
        row(row) {}
  std::size_t row;
};

struct SingularInformation : Error {
  explicit SingularInformation(const std::string& msg)
      : Error(ErrorKind::numerical, "singular_information", msg) {}
};

struct NoAdmissibleStart : Error {
  explicit NoAdmissibleStart(const std::string& msg)
      : Error(ErrorKind::numerical, "no_admissible_start", msg) {}
};

struct UnitLeverage : Error {
  explicit UnitLeverage(std::size_t row)
      : Error(ErrorKind::numerical, "unit_leverage",
              "leverage equals one at observation " + std::to_string(row + 1)),
        row(row) {}
  std::size_t row;
};

struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(ErrorKind::data, "data_error", msg) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& msg) : Error(ErrorKind::usage, "usage_error", msg) {}
};

}  // namespace betareg
