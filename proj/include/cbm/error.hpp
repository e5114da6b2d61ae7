#pragma once

#include <stdexcept>
#include <string>

namespace cbm {

enum class ErrorCode {
  MissingColumn,
  BadLabel,
  BadFeatureValue,
  BadRow,
  DuplicateReportId,
  EmptyCohort,
  UnknownUser,
  EmptyInput,
  InsufficientData,
  EmptyCommunity,
  WidthMismatch,
  EmptyTrainingSet,
  InsufficientRows,
  LengthMismatch,
  Empty,
  NoEligibleClass,
  MissingContextColumn,
  InsufficientContextReports,
  IoError,
  ConfigError,
  Precondition,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "missing_column";
    case ErrorCode::BadLabel: return "bad_label";
    case ErrorCode::BadFeatureValue: return "bad_feature_value";
    case ErrorCode::BadRow: return "bad_row";
    case ErrorCode::DuplicateReportId: return "duplicate_report_id";
    case ErrorCode::EmptyCohort: return "empty_cohort";
    case ErrorCode::UnknownUser: return "unknown_user";
    case ErrorCode::EmptyInput: return "empty_input";
    case ErrorCode::InsufficientData: return "insufficient_data";
    case ErrorCode::EmptyCommunity: return "empty_community";
    case ErrorCode::WidthMismatch: return "width_mismatch";
    case ErrorCode::EmptyTrainingSet: return "empty_training_set";
    case ErrorCode::InsufficientRows: return "insufficient_rows";
    case ErrorCode::LengthMismatch: return "length_mismatch";
    case ErrorCode::Empty: return "empty";
    case ErrorCode::NoEligibleClass: return "no_eligible_class";
    case ErrorCode::MissingContextColumn: return "missing_context_column";
    case ErrorCode::InsufficientContextReports: return "insufficient_context_reports";
    case ErrorCode::IoError: return "io_error";
    case ErrorCode::ConfigError: return "config_error";
    case ErrorCode::Precondition: return "precondition";
  }
  return "unknown";
}

/// Library-wide exception carrying a stable machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace cbm
