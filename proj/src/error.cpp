#include "odiwi/error.hpp"

namespace odiwi {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::Separation: return "Separation";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::EmptyDesign: return "EmptyDesign";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::SingularInformation: return "SingularInformation";
    case ErrorCode::EmptyAfterPrune: return "EmptyAfterPrune";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::AllZeroWeights: return "AllZeroWeights";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
      return ErrorCategory::Usage;
    case ErrorCode::SchemaError:
    case ErrorCode::MissingValue:
    case ErrorCode::IoError:
      return ErrorCategory::Data;
    default:
      return ErrorCategory::Numerical;
  }
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(what), code_(code) {}

namespace {
std::string locate(std::optional<long> row, const std::string& column,
                   const std::string& detail) {
  std::string msg = detail;
  if (row || !column.empty()) {
    msg += " (";
    if (row) msg += "row=" + std::to_string(*row);
    if (row && !column.empty()) msg += ", ";
    if (!column.empty()) msg += "col=\"" + column + "\"";
    msg += ")";
  }
  return msg;
}
}  // namespace

DataError::DataError(ErrorCode code, std::optional<long> row, std::string column,
                     const std::string& detail)
    : Error(code, locate(row, column, detail)), row_(row), column_(std::move(column)) {}

}  // namespace odiwi
