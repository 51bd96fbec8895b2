//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <string>

namespace linkdiff {

enum class ErrorCode {
  kEmptySelection,
  kInvalidIsometry,
  kShapeMismatch,
  kInvalidSchedule,
  kNoPosteriorAtZero,
  kTapeMismatch,
  kUnknownAtomType,
  kEmptyLinker,
  kInvalidDistribution,
  kUnknownSizeClass,
  kEmptyGraph,
  kFragmentMatchFailure,
  kParseError,
  kInvalidConfig,
  kIoError,
};

const char *to_string(ErrorCode code) noexcept;

class Error: public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) { }

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

inline const char *to_string(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::kEmptySelection:
    return "EmptySelection";
  case ErrorCode::kInvalidIsometry:
    return "InvalidIsometry";
  case ErrorCode::kShapeMismatch:
    return "ShapeMismatch";
  case ErrorCode::kInvalidSchedule:
    return "InvalidSchedule";
  case ErrorCode::kNoPosteriorAtZero:
    return "NoPosteriorAtZero";
  case ErrorCode::kTapeMismatch:
    return "TapeMismatch";
  case ErrorCode::kUnknownAtomType:
    return "UnknownAtomType";
  case ErrorCode::kEmptyLinker:
    return "EmptyLinker";
  case ErrorCode::kInvalidDistribution:
    return "InvalidDistribution";
  case ErrorCode::kUnknownSizeClass:
    return "UnknownSizeClass";
  case ErrorCode::kEmptyGraph:
    return "EmptyGraph";
  case ErrorCode::kFragmentMatchFailure:
    return "FragmentMatchFailure";
  case ErrorCode::kParseError:
    return "ParseError";
  case ErrorCode::kInvalidConfig:
    return "InvalidConfig";
  case ErrorCode::kIoError:
    return "IoError";
  }
  return "Unknown";
}

}  // namespace linkdiff
