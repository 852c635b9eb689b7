// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartground/evaluator.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "chartground/error.hpp"
#include "chartground/reward.hpp"
#include "text_util.hpp"

namespace chartground {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void schema_error(const std::string& why) { throw Error(ErrorCode::kSchemaViolation, why); }

std::vector<BBox> parse_boxes(const json& node, const char* field, bool allow_empty) {
  if (!node.is_array()) schema_error(std::string(field) + ": expected an array of boxes");
  if (!allow_empty && node.empty()) schema_error(std::string(field) + ": must be non-empty");
  std::vector<BBox> out;
  for (const auto& q : node) {
    if (!q.is_array() || q.size() != 4) schema_error(std::string(field) + ": boxes are [x_min, y_min, x_max, y_max]");
    double v[4];
    for (std::size_t i = 0; i < 4; ++i) {
      if (!q[i].is_number()) schema_error(std::string(field) + ": coordinates must be numbers");
      v[i] = q[i].get<double>();
    }
    auto b = BBox::try_make(v[0], v[1], v[2], v[3]);
    if (!b) schema_error(std::string(field) + ": degenerate box");
    out.push_back(*b);
  }
  return out;
}

ordered_json boxes_json(const std::vector<BBox>& boxes) {
  ordered_json out = ordered_json::array();
  for (const auto& b : boxes) out.push_back({b.x_min(), b.y_min(), b.x_max(), b.y_max()});
  return out;
}

ordered_json entry_json(const BreakdownEntry& e) {
  ordered_json out;
  out["items"] = e.items;
  out["total_gt_boxes"] = e.total_gt_boxes;
  out["matched_gt_boxes"] = e.matched_gt_boxes;
  out["recall"] = e.recall;
  out["qa_items"] = e.qa_items;
  out["qa_correct"] = e.qa_correct;
  return out;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (detail::trim(line).empty()) continue;
    try {
      fn(line);
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(number) + ": " + e.detail());
    }
  }
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedJson, e.what());
  }
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%6.2f%%", 100.0 * v);
  return buf;
}

}  // namespace

std::string_view benchmark_kind_name(BenchmarkKind kind) {
  return kind == BenchmarkKind::kGrounding ? "grounding" : "qa_grounding";
}

EvalReport evaluate(const std::vector<BenchmarkItem>& items, const PredictionMap& predictions,
                    double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "IoU threshold must lie in (0, 1]");
  }
  if (items.empty()) throw Error(ErrorCode::kEmptyBenchmark, "benchmark has no items");
  std::set<std::string> ids;
  for (const auto& item : items) {
    if (!ids.insert(item.question_id).second) {
      throw Error(ErrorCode::kDuplicateQuestionId, "question_id '" + item.question_id + "' repeats");
    }
  }

  EvalReport report;
  report.threshold = threshold;
  report.items = items.size();
  const Prediction empty;
  for (const auto& item : items) {
    auto it = predictions.find(item.question_id);
    if (it == predictions.end()) ++report.missing_predictions;
    const Prediction& pred = it != predictions.end() ? it->second : empty;

    const auto match = match_and_recall(pred.boxes, item.gt_boxes, threshold);
    const bool is_qa = item.kind == BenchmarkKind::kQaGrounding;
    const bool correct = is_qa && answer_accuracy(pred.answer.value_or(""), item.gt_answer.value_or("")) == 1;

    for (BreakdownEntry* e : {&report.per_kind[std::string(benchmark_kind_name(item.kind))],
                              &report.per_category[item.category]}) {
      e->items += 1;
      e->total_gt_boxes += item.gt_boxes.size();
      e->matched_gt_boxes += match.matched;
      e->qa_items += is_qa ? 1 : 0;
      e->qa_correct += correct ? 1 : 0;
    }
    report.total_gt_boxes += item.gt_boxes.size();
    report.matched_gt_boxes += match.matched;
    report.qa_items += is_qa ? 1 : 0;
    report.qa_correct += correct ? 1 : 0;
  }

  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  report.recall_at_threshold = ratio(report.matched_gt_boxes, report.total_gt_boxes);
  report.qa_accuracy = ratio(report.qa_correct, report.qa_items);
  for (auto* group : {&report.per_kind, &report.per_category}) {
    for (auto& [_, e] : *group) e.recall = ratio(e.matched_gt_boxes, e.total_gt_boxes);
  }
  return report;
}

BenchmarkStats benchmark_stats(const std::vector<BenchmarkItem>& items) {
  BenchmarkStats stats;
  for (const auto& item : items) {
    (item.kind == BenchmarkKind::kGrounding ? stats.grounding_items : stats.qa_grounding_items) += 1;
    stats.total_gt_boxes += item.gt_boxes.size();
  }
  return stats;
}

BenchmarkManifest parse_benchmark_manifest(std::string_view text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) schema_error("manifest: expected an object");
  BenchmarkManifest m;
  auto count = [&](const char* key, std::optional<std::size_t>& slot) {
    if (!doc.contains(key)) return;
    if (!doc.at(key).is_number_unsigned()) schema_error(std::string("manifest.") + key + ": expected a count");
    slot = doc.at(key).get<std::size_t>();
  };
  count("grounding", m.grounding_items);
  count("qa_grounding", m.qa_grounding_items);
  count("total_gt_boxes", m.total_gt_boxes);
  return m;
}

std::vector<std::string> compare_with_manifest(const BenchmarkStats& stats,
                                               const BenchmarkManifest& manifest) {
  std::vector<std::string> warnings;
  auto check = [&](const char* what, const std::optional<std::size_t>& expected, std::size_t actual) {
    if (expected && *expected != actual) {
      warnings.push_back(std::string(what) + ": manifest expects " + std::to_string(*expected) +
                         ", file has " + std::to_string(actual));
    }
  };
  check("grounding items", manifest.grounding_items, stats.grounding_items);
  check("qa_grounding items", manifest.qa_grounding_items, stats.qa_grounding_items);
  check("total gt boxes", manifest.total_gt_boxes, stats.total_gt_boxes);
  return warnings;
}

BenchmarkItem benchmark_item_from_json(std::string_view line) {
  const json doc = parse_json(line);
  if (!doc.is_object()) schema_error("item: expected an object");
  auto str = [&](const char* key) {
    if (!doc.contains(key) || !doc.at(key).is_string()) schema_error(std::string(key) + ": expected a string");
    return doc.at(key).get<std::string>();
  };
  BenchmarkItem item;
  item.question_id = str("question_id");
  if (item.question_id.empty()) schema_error("question_id: must be non-empty");
  const auto kind = str("kind");
  if (kind == "grounding") {
    item.kind = BenchmarkKind::kGrounding;
  } else if (kind == "qa_grounding") {
    item.kind = BenchmarkKind::kQaGrounding;
  } else {
    schema_error("kind: expected grounding or qa_grounding");
  }
  item.image_ref = str("image_ref");
  item.question = str("question");
  if (!doc.contains("gt_boxes")) schema_error("gt_boxes: missing");
  item.gt_boxes = parse_boxes(doc.at("gt_boxes"), "gt_boxes", false);
  const bool has_answer = doc.contains("gt_answer") && !doc.at("gt_answer").is_null();
  if (item.kind == BenchmarkKind::kQaGrounding) {
    if (!has_answer) schema_error("gt_answer: required for qa_grounding items");
    item.gt_answer = str("gt_answer");
  } else if (has_answer) {
    schema_error("gt_answer: only qa_grounding items carry an answer");
  }
  if (doc.contains("category") && !doc.at("category").is_null()) {
    item.category = str("category");
    if (item.category.empty()) schema_error("category: must be non-empty");
  }
  return item;
}

std::string benchmark_item_to_json(const BenchmarkItem& item) {
  ordered_json doc;
  doc["question_id"] = item.question_id;
  doc["kind"] = benchmark_kind_name(item.kind);
  doc["image_ref"] = item.image_ref;
  doc["question"] = item.question;
  doc["gt_boxes"] = boxes_json(item.gt_boxes);
  doc["gt_answer"] = item.gt_answer ? ordered_json(*item.gt_answer) : ordered_json(nullptr);
  doc["category"] = item.category;
  return doc.dump();
}

std::vector<BenchmarkItem> load_benchmark(const std::filesystem::path& path) {
  std::vector<BenchmarkItem> items;
  for_each_line(path, [&](const std::string& line) { items.push_back(benchmark_item_from_json(line)); });
  return items;
}

PredictionMap load_predictions(const std::filesystem::path& path) {
  PredictionMap out;
  for_each_line(path, [&](const std::string& line) {
    const json doc = parse_json(line);
    if (!doc.is_object()) schema_error("prediction: expected an object");
    if (!doc.contains("question_id") || !doc.at("question_id").is_string()) {
      schema_error("question_id: expected a string");
    }
    Prediction p;
    if (doc.contains("boxes") && !doc.at("boxes").is_null()) p.boxes = parse_boxes(doc.at("boxes"), "boxes", true);
    if (doc.contains("answer") && !doc.at("answer").is_null()) {
      if (!doc.at("answer").is_string()) schema_error("answer: expected a string");
      p.answer = doc.at("answer").get<std::string>();
    }
    out[doc.at("question_id").get<std::string>()] = std::move(p);
  });
  return out;
}

std::string report_to_json(const EvalReport& r) {
  ordered_json doc;
  doc["threshold"] = r.threshold;
  doc["items"] = r.items;
  doc["total_gt_boxes"] = r.total_gt_boxes;
  doc["matched_gt_boxes"] = r.matched_gt_boxes;
  doc["recall_at_threshold"] = r.recall_at_threshold;
  doc["qa_items"] = r.qa_items;
  doc["qa_correct"] = r.qa_correct;
  doc["qa_accuracy"] = r.qa_accuracy;
  doc["missing_predictions"] = r.missing_predictions;
  doc["per_kind"] = ordered_json::object();
  for (const auto& [k, e] : r.per_kind) doc["per_kind"][k] = entry_json(e);
  doc["per_category"] = ordered_json::object();
  for (const auto& [k, e] : r.per_category) doc["per_category"][k] = entry_json(e);
  return doc.dump(2);
}

std::string report_to_table(const EvalReport& r) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "recall@%g: %s (%zu / %zu GT boxes, %zu items, %zu without prediction)\n",
                r.threshold, pct(r.recall_at_threshold).c_str(), r.matched_gt_boxes, r.total_gt_boxes,
                r.items, r.missing_predictions);
  out << line;
  std::snprintf(line, sizeof(line), "qa accuracy: %s (%zu / %zu)\n", pct(r.qa_accuracy).c_str(),
                r.qa_correct, r.qa_items);
  out << line;
  auto section = [&](const char* title, const std::map<std::string, BreakdownEntry>& rows) {
    std::snprintf(line, sizeof(line), "\n%-24s %6s %8s %8s %9s %9s\n", title, "items", "gt", "matched",
                  "recall", "qa acc");
    out << line;
    for (const auto& [name, e] : rows) {
      const std::string qa = e.qa_items == 0 ? "-" : pct(static_cast<double>(e.qa_correct) / e.qa_items);
      std::snprintf(line, sizeof(line), "%-24s %6zu %8zu %8zu %9s %9s\n", name.c_str(), e.items,
                    e.total_gt_boxes, e.matched_gt_boxes, pct(e.recall).c_str(), qa.c_str());
      out << line;
    }
  };
  section("kind", r.per_kind);
  section("category", r.per_category);
  return out.str();
}

}  // namespace chartground
