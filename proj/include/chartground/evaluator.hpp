// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chartground/geometry.hpp"

namespace chartground {

enum class BenchmarkKind { kGrounding, kQaGrounding };

std::string_view benchmark_kind_name(BenchmarkKind kind);

struct BenchmarkItem {
  std::string question_id;
  BenchmarkKind kind = BenchmarkKind::kGrounding;
  std::string image_ref;
  std::string question;
  std::vector<BBox> gt_boxes;
  std::optional<std::string> gt_answer;  // required iff kind is qa_grounding
  std::string category = "uncategorized";
};

struct Prediction {
  std::vector<BBox> boxes;
  std::optional<std::string> answer;
};

using PredictionMap = std::map<std::string, Prediction>;

inline constexpr double kDefaultRecallThreshold = 0.3;

struct BreakdownEntry {
  std::size_t items = 0;
  std::size_t total_gt_boxes = 0;
  std::size_t matched_gt_boxes = 0;
  double recall = 0.0;
  std::size_t qa_items = 0;
  std::size_t qa_correct = 0;
};

struct EvalReport {
  double threshold = kDefaultRecallThreshold;
  std::size_t items = 0;
  std::size_t total_gt_boxes = 0;
  std::size_t matched_gt_boxes = 0;
  double recall_at_threshold = 0.0;  // micro average over GT boxes
  std::size_t qa_items = 0;
  std::size_t qa_correct = 0;
  double qa_accuracy = 0.0;  // 0 when there are no qa_grounding items
  std::size_t missing_predictions = 0;
  std::map<std::string, BreakdownEntry> per_kind;
  std::map<std::string, BreakdownEntry> per_category;
};

/// Scores predictions against a benchmark. Items without a prediction count
/// as zero boxes and an empty answer.
/// Errors: kEmptyBenchmark, kDuplicateQuestionId, kInvalidArgument (threshold).
EvalReport evaluate(const std::vector<BenchmarkItem>& items, const PredictionMap& predictions,
                    double threshold = kDefaultRecallThreshold);

struct BenchmarkStats {
  std::size_t grounding_items = 0;
  std::size_t qa_grounding_items = 0;
  std::size_t total_gt_boxes = 0;
};

BenchmarkStats benchmark_stats(const std::vector<BenchmarkItem>& items);

/// Expected composition, e.g. {"grounding": 350, "qa_grounding": 342,
/// "total_gt_boxes": 692}. Absent fields are not checked.
struct BenchmarkManifest {
  std::optional<std::size_t> grounding_items;
  std::optional<std::size_t> qa_grounding_items;
  std::optional<std::size_t> total_gt_boxes;
};

BenchmarkManifest parse_benchmark_manifest(std::string_view json);

/// One human-readable warning per mismatching count, naming both numbers.
std::vector<std::string> compare_with_manifest(const BenchmarkStats& stats,
                                               const BenchmarkManifest& manifest);

BenchmarkItem benchmark_item_from_json(std::string_view line);
std::string benchmark_item_to_json(const BenchmarkItem& item);

/// Errors: kIo; kSchemaViolation / kMalformedJson prefixed with "line N".
std::vector<BenchmarkItem> load_benchmark(const std::filesystem::path& path);
/// Lines of {question_id, boxes, answer}. A repeated id keeps the last line.
PredictionMap load_predictions(const std::filesystem::path& path);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

}  // namespace chartground
