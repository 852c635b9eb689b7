// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chartground {

/// Failure categories surfaced by the core. The C API maps each one onto a
/// stable integer status code, so new values go at the end.
enum class ErrorCode {
  kInvalidArgument = 1,
  kIo,
  kMalformedJson,
  kSchemaViolation,
  kBoxOutOfBounds,
  kInvalidBox,
  kEmptyGroundTruth,
  kUnknownCategory,
  kEmptyScript,
  kNoParseableContent,
  kNoAnswerBlock,
  kUnparseableBox,
  kJudgeParseError,
  kGroupTooSmall,
  kDuplicateQuestionId,
  kEmptyBenchmark,
  kProviderError,
  kReplayMiss,
  kTimeout,
  kNoCodeBlock,
  kEvolutionFailed,
  kVerdictMisaligned,
  kInsufficientRecords,
  kRenderFailed,
  kCancelled,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code-name prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace chartground
