#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace simex {

/// Broad failure classes; the CLI maps them onto exit codes.
enum class ErrorClass { config, data, estimation };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string kind, const std::string& message)
      : std::runtime_error(message), cls_(cls), kind_(std::move(kind)) {}

  ErrorClass error_class() const noexcept { return cls_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorClass cls_;
  std::string kind_;
};

#define SIMEX_DEFINE_ERROR(Name, Class)                                   \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message)                             \
        : Error(ErrorClass::Class, #Name, message) {}                     \
  };

SIMEX_DEFINE_ERROR(ConfigError, config)
SIMEX_DEFINE_ERROR(DimensionMismatch, data)
SIMEX_DEFINE_ERROR(InvalidData, data)
SIMEX_DEFINE_ERROR(MissingColumn, data)
SIMEX_DEFINE_ERROR(InvalidCovariance, data)
SIMEX_DEFINE_ERROR(RankDeficient, data)
SIMEX_DEFINE_ERROR(ZeroSlope, data)
SIMEX_DEFINE_ERROR(DegenerateIndex, data)
SIMEX_DEFINE_ERROR(SingularFit, estimation)
SIMEX_DEFINE_ERROR(OutOfBall, estimation)
SIMEX_DEFINE_ERROR(SingularBn, estimation)
SIMEX_DEFINE_ERROR(SingularDesign, estimation)
SIMEX_DEFINE_ERROR(TooManyFailures, estimation)

#undef SIMEX_DEFINE_ERROR

/// Malformed input file; `row` is 1-based over data rows (header excluded).
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& message)
      : Error(ErrorClass::data, "ParseError", message), row_(row), column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

}  // namespace simex
