#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace corrisk {

enum class ErrorCode {
  NotSquare,
  DiagonalNotOne,
  EntryOutOfRange,
  NotPositiveSemidefinite,
  SingularPivot,
  DomainError,
  NonPositiveHazard,
  InvalidContract,
  InvalidConfig,
  NBinsTooSmall,
  UnequalBins,
  BumpBreaksPSD,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::DiagonalNotOne: return "DiagonalNotOne";
    case ErrorCode::EntryOutOfRange: return "EntryOutOfRange";
    case ErrorCode::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
    case ErrorCode::SingularPivot: return "SingularPivot";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NonPositiveHazard: return "NonPositiveHazard";
    case ErrorCode::InvalidContract: return "InvalidContract";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NBinsTooSmall: return "NBinsTooSmall";
    case ErrorCode::UnequalBins: return "UnequalBins";
    case ErrorCode::BumpBreaksPSD: return "BumpBreaksPSD";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Configuration problems as opposed to numerical failures; the CLI maps
  // these to different exit codes.
  bool is_configuration() const noexcept {
    switch (code_) {
      case ErrorCode::InvalidConfig:
      case ErrorCode::InvalidContract:
      case ErrorCode::NotSquare:
      case ErrorCode::DiagonalNotOne:
      case ErrorCode::EntryOutOfRange:
      case ErrorCode::NonPositiveHazard:
      case ErrorCode::NBinsTooSmall:
      case ErrorCode::UnequalBins:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorCode code_;
};

}  // namespace corrisk
