// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "chartground/annotation.hpp"
#include "chartground/geometry.hpp"

namespace chartground {

struct RolloutResponse {
  TaskKind task = TaskKind::kQa;
  std::string raw_text;
};

inline constexpr std::array<std::string_view, 5> kJudgeAxes = {
    "data", "plot type structure", "axes scales and limits", "text elements", "styling"};

struct RewardConfig {
  double accuracy_weight = 0.9;
  /// Per-task override of accuracy_weight.
  std::map<TaskKind, double> task_accuracy_weight;
  bool iou_as_reward = true;
  int judge_max_per_axis = 5;
  std::vector<std::string> judge_axes{kJudgeAxes.begin(), kJudgeAxes.end()};
  double group_std_epsilon = 1e-6;

  double weight_for(TaskKind task) const;
  /// Throws Error(kInvalidArgument) on a weight outside [0, 1], a judge axis
  /// list that is not five long, or a non-positive epsilon.
  void validate() const;
};

struct RewardBreakdown {
  double accuracy = 0.0;
  double format = 0.0;
  double final = 0.0;
};

/// 1 when the response has exactly one <think> block followed by exactly one
/// <answer> block (only whitespace around and between them), plus the
/// task-specific body shape; 0 otherwise.
int format_reward(const RolloutResponse& response);

using AnswerPayload = std::variant<std::string, std::vector<BBox>>;

/// Content of the last <answer> block parsed per task: trimmed text for qa,
/// every [x1,y1,x2,y2] quadruple for grounding, the longest fenced block (or
/// the trimmed body if unfenced) for chart_to_code.
/// Errors: kNoAnswerBlock, kUnparseableBox.
AnswerPayload extract_answer(const RolloutResponse& response);

/// Canonical form used by answer_accuracy.
std::string normalize_answer(std::string_view text);

/// 1 when the normalized answers agree, numerically (relative 1e-4,
/// absolute 1e-6 near zero) if both parse as numbers.
int answer_accuracy(std::string_view pred_text, std::string_view gt_text);

/// IoU of the first predicted box against the target; 0 with no boxes.
double grounding_reward(std::span<const BBox> pred_boxes, const BBox& gt_box);

struct JudgeVerdict {
  std::vector<int> scores;  // clamped, in cfg.judge_axes order
  double reward = 0.0;
};

/// Parses a judge verdict (JSON object mapping every axis to an integer),
/// clamps each score to [0, max] and returns sum / (axes * max).
/// Errors: kJudgeParseError.
JudgeVerdict parse_judge_verdict(std::string_view judge_text, const RewardConfig& cfg);
double code_reward(std::string_view judge_text, const RewardConfig& cfg);

/// final = a * acc + (1 - a) * fmt with a = cfg.weight_for(task).
RewardBreakdown final_reward(double accuracy, int format, const RewardConfig& cfg,
                             TaskKind task = TaskKind::kQa);

/// (r_i - mean) / (population std + epsilon); exactly zero for a constant
/// group. Errors: kGroupTooSmall below two rewards.
std::vector<double> group_advantages(std::span<const double> rewards, const RewardConfig& cfg);

/// Ground truth for one rollout group.
using GroundTruth = std::variant<std::string, BBox>;  // qa text or target box

struct ScoredRollout {
  RewardBreakdown reward;
  double advantage = 0.0;
  std::optional<std::string> judge_error;
};

/// Scores a whole group. For chart_to_code, judge_texts[i] holds the judge
/// verdict for rollout i. When `judge_errors_as_zero` is false a verdict
/// parse failure propagates as kJudgeParseError.
std::vector<ScoredRollout> score_group(TaskKind task, const std::optional<GroundTruth>& gt,
                                       std::span<const std::string> rollouts,
                                       std::span<const std::string> judge_texts,
                                       const RewardConfig& cfg, bool judge_errors_as_zero);

/// Accuracy reward of one response, as used for both RL and difficulty
/// probes. Unextractable answers score 0.
double accuracy_reward(const RolloutResponse& response, const GroundTruth& gt);

/// Returns the judge's raw verdict for a candidate script against the
/// reference script.
using JudgeFn = std::function<std::string(const std::string& candidate, const std::string& reference)>;

struct RolloutFileSummary {
  std::size_t groups = 0;
  std::size_t lines_written = 0;
  std::size_t judge_errors = 0;
};

/// Rollout scoring file mode. Input JSONL lines:
///   {"record_id", "task", "gt_text" | "gt_box" | "gt_script", "rollouts": [...],
///    optional "judge_texts": [...]}
/// Output: one JSONL line per rollout with the breakdown and group advantage.
/// Errors: kIo, kMalformedJson, kSchemaViolation (with line number),
/// kGroupTooSmall, kJudgeParseError.
RolloutFileSummary score_rollout_file(const std::filesystem::path& in,
                                      const std::filesystem::path& out, const RewardConfig& cfg,
                                      const JudgeFn& judge, bool judge_errors_as_zero);

}  // namespace chartground
