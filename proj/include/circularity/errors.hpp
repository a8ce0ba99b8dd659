#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace circularity {

enum class ErrorCode {
  EmptyDataset,
  MissingColumn,
  UnknownCategory,
  NonNumeric,
  ViolatedBound,
  InvalidArgument,
  KTooLarge,
  InvalidGossFractions,
  SchemaMismatch,
  VersionMismatch,
  CorruptFile,
  NegativeSigma,
  NoSuccessfulTrials,
  SingularKernel,
  BudgetTooSmall,
  LengthMismatch,
  EmptyInput,
  FewerThanTwoModels,
  InconsistentScopes,
  TooManyFeatures,
  EmptyBackground,
  NoStoreys,
  NonPositiveDimension,
  Io,
};

// Stable snake_case identifiers; the HTTP service exposes these verbatim.
constexpr std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyDataset: return "empty_dataset";
    case ErrorCode::MissingColumn: return "missing_column";
    case ErrorCode::UnknownCategory: return "unknown_category";
    case ErrorCode::NonNumeric: return "non_numeric";
    case ErrorCode::ViolatedBound: return "violated_bound";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::KTooLarge: return "k_too_large";
    case ErrorCode::InvalidGossFractions: return "invalid_goss_fractions";
    case ErrorCode::SchemaMismatch: return "schema_mismatch";
    case ErrorCode::VersionMismatch: return "version_mismatch";
    case ErrorCode::CorruptFile: return "corrupt_file";
    case ErrorCode::NegativeSigma: return "negative_sigma";
    case ErrorCode::NoSuccessfulTrials: return "no_successful_trials";
    case ErrorCode::SingularKernel: return "singular_kernel";
    case ErrorCode::BudgetTooSmall: return "budget_too_small";
    case ErrorCode::LengthMismatch: return "length_mismatch";
    case ErrorCode::EmptyInput: return "empty_input";
    case ErrorCode::FewerThanTwoModels: return "fewer_than_two_models";
    case ErrorCode::InconsistentScopes: return "inconsistent_scopes";
    case ErrorCode::TooManyFeatures: return "too_many_features";
    case ErrorCode::EmptyBackground: return "empty_background";
    case ErrorCode::NoStoreys: return "no_storeys";
    case ErrorCode::NonPositiveDimension: return "non_positive_dimension";
    case ErrorCode::Io: return "io_error";
  }
  return "unknown";
}

/// Every failure raised by the library. `row` is the 1-based line number for
/// file-ingestion errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> row = std::nullopt)
      : std::runtime_error(format(code, message, row)), code_(code), row_(row) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  static std::string format(ErrorCode code, const std::string& message,
                            std::optional<std::size_t> row) {
    std::string out(code_name(code));
    if (row) out += " at line " + std::to_string(*row);
    out += ": " + message;
    return out;
  }

  ErrorCode code_;
  std::optional<std::size_t> row_;
};

}  // namespace circularity
