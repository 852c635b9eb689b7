// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartground/error.hpp"

namespace chartground {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kMalformedJson: return "MalformedJson";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kBoxOutOfBounds: return "BoxOutOfBounds";
    case ErrorCode::kInvalidBox: return "InvalidBox";
    case ErrorCode::kEmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kEmptyScript: return "EmptyScript";
    case ErrorCode::kNoParseableContent: return "NoParseableContent";
    case ErrorCode::kNoAnswerBlock: return "NoAnswerBlock";
    case ErrorCode::kUnparseableBox: return "UnparseableBox";
    case ErrorCode::kJudgeParseError: return "JudgeParseError";
    case ErrorCode::kGroupTooSmall: return "GroupTooSmall";
    case ErrorCode::kDuplicateQuestionId: return "DuplicateQuestionId";
    case ErrorCode::kEmptyBenchmark: return "EmptyBenchmark";
    case ErrorCode::kProviderError: return "ProviderError";
    case ErrorCode::kReplayMiss: return "ReplayMiss";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kNoCodeBlock: return "NoCodeBlock";
    case ErrorCode::kEvolutionFailed: return "EvolutionFailed";
    case ErrorCode::kVerdictMisaligned: return "VerdictMisaligned";
    case ErrorCode::kInsufficientRecords: return "InsufficientRecords";
    case ErrorCode::kRenderFailed: return "RenderFailed";
    case ErrorCode::kCancelled: return "Cancelled";
  }
  return "Unknown";
}

}  // namespace chartground
