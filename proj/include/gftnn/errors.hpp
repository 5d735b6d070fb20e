#pragma once

#include <stdexcept>
#include <string>

namespace gftnn {

/// Base class for every failure raised by the library. `kind()` is a short,
/// stable token the CLI prints in front of the message.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define GFTNN_DEFINE_ERROR(Name, token)                                   \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& message) : Error(token, message) {} \
  }

GFTNN_DEFINE_ERROR(InvalidSizeError, "invalid-size");
GFTNN_DEFINE_ERROR(IndexError, "index");
GFTNN_DEFINE_ERROR(DataError, "data");
GFTNN_DEFINE_ERROR(ContractViolation, "contract");
GFTNN_DEFINE_ERROR(DimensionError, "dimension");
GFTNN_DEFINE_ERROR(SchemaError, "schema");
GFTNN_DEFINE_ERROR(ParseError, "parse");
GFTNN_DEFINE_ERROR(BalanceError, "balance");
GFTNN_DEFINE_ERROR(SplitError, "split");
GFTNN_DEFINE_ERROR(NumericError, "numeric");
GFTNN_DEFINE_ERROR(ConfigError, "config");
GFTNN_DEFINE_ERROR(IoError, "io");

#undef GFTNN_DEFINE_ERROR

}  // namespace gftnn
