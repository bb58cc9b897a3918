#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace odiwi {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  SchemaError,
  MissingValue,
  IoError,
  RankDeficient,
  Separation,
  NoConvergence,
  EmptyDesign,
  DegenerateRange,
  SingularInformation,
  EmptyAfterPrune,
  DegenerateSample,
  AllZeroWeights,
  TooManyFailures,
};

// Coarse grouping used for process exit statuses.
enum class ErrorCategory { Usage, Data, Numerical };

const char* to_string(ErrorCode code);
ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

// Raised by the CSV loaders; row is the 1-based data row (header excluded).
class DataError : public Error {
public:
  DataError(ErrorCode code, std::optional<long> row, std::string column,
            const std::string& detail);

  std::optional<long> row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

private:
  std::optional<long> row_;
  std::string column_;
};

}  // namespace odiwi
