// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chartground/element_map.hpp"
#include "chartground/geometry.hpp"

namespace chartground {

enum class TaskKind { kQa, kGrounding, kChartToCode };
enum class ReasoningScope { kGlobal, kLocal };
enum class Split { kSft, kRl };

std::string_view task_name(TaskKind task);
std::optional<TaskKind> task_from_name(std::string_view name);
std::string_view scope_name(ReasoningScope scope);
std::optional<ReasoningScope> scope_from_name(std::string_view name);
std::string_view split_name(Split split);

/// One training or evaluation item. Exactly one answer payload is set and it
/// matches the task: qa -> answer_text, grounding -> answer_boxes,
/// chart_to_code -> answer_script.
struct DatasetRecord {
  std::string record_id;
  TaskKind task = TaskKind::kQa;
  std::string image_ref;
  std::string question;
  std::optional<std::string> answer_text;
  std::optional<std::vector<BBox>> answer_boxes;
  std::optional<std::string> answer_script;
  std::optional<ReasoningScope> reasoning_scope;
  Split split = Split::kSft;
  std::map<std::string, std::string> provenance;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

/// Throws Error(kSchemaViolation) if the payload-exclusivity or box
/// invariants do not hold.
void validate_record(const DatasetRecord& record);

/// Content hash over (task, image_ref, question, answer payload).
std::string compute_record_id(const DatasetRecord& record);

inline constexpr std::string_view kDefaultTemplateSet = "v1";

/// Renders the grounding question for a sampled element. Pure in
/// (category, texts, indices, template_set_version).
/// Errors: kUnknownCategory (no template for the category or an unknown
/// template set version).
std::string render_grounding_question(const SampledElement& element,
                                      std::string_view template_set_version);

DatasetRecord grounding_record(const SampledElement& element, std::string_view image_ref,
                               std::string_view template_set_version = kDefaultTemplateSet);

/// Number of fixed chart-to-code prompts.
std::size_t chart_to_code_prompt_count();

/// Builds a chart-to-code record; the prompt is chosen by `prompt_index`
/// (modulo the prompt count) or, when absent, by the script's content hash.
/// Errors: kEmptyScript.
DatasetRecord chart_to_code_record(std::string_view script, std::string_view image_ref,
                                   std::optional<std::size_t> prompt_index = std::nullopt);

DatasetRecord qa_record(std::string_view question, std::string_view answer,
                        ReasoningScope scope, std::string_view image_ref);

struct QaPair {
  std::string question;
  std::string answer;
  ReasoningScope scope = ReasoningScope::kLocal;

  friend bool operator==(const QaPair&, const QaPair&) = default;
};

inline constexpr std::size_t kMaxQaPairs = 10;

struct QaParseResult {
  std::vector<QaPair> pairs;
  std::size_t dropped_invalid = 0;   // objects failing the grammar
  std::size_t dropped_truncated = 0; // valid objects beyond kMaxQaPairs
};

/// Extracts QA pairs from a generation response: the first JSON array of
/// {question, answer, scope} objects found in the text (fenced or bare).
/// Errors: kNoParseableContent when no pair survives.
QaParseResult parse_qa_generation(std::string_view model_output);

// Answer serialization: the exact <think>/<answer> shape the format reward
// accepts.
std::string format_box(const BBox& box);
std::string answer_body(const DatasetRecord& record);
std::string render_response(std::string_view think, std::string_view body);

std::string record_to_json(const DatasetRecord& record);
/// Errors: kMalformedJson, kSchemaViolation.
DatasetRecord record_from_json(std::string_view line);

/// Single-writer JSONL appender; one record per line.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path, bool append = false);
  void write(const DatasetRecord& record);
  void flush();

 private:
  std::ofstream out_;
};

void write_jsonl(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);
/// Errors: kIo; kSchemaViolation / kMalformedJson prefixed with "line N".
std::vector<DatasetRecord> read_jsonl(const std::filesystem::path& path);

}  // namespace chartground
