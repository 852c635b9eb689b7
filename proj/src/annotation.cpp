// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartground/annotation.hpp"

#include <json.hpp>

#include <array>

#include "chartground/error.hpp"
#include "chartground/hashing.hpp"
#include "text_util.hpp"

namespace chartground {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

// Grounding question templates. Placeholders: {subplot}, {text}, {axis}.
// Each category has at least two surface variants; the variant is picked by
// a hash of the rendered inputs, so the choice is reproducible.
struct TemplateSet {
  std::string_view version;
  std::map<std::string, std::vector<std::string_view>, std::less<>> by_category;
};

const std::vector<TemplateSet>& template_sets() {
  static const std::vector<TemplateSet> sets = {
      {"v1",
       {
           {"title",
            {"Where is the title of subplot {subplot}? Answer with a bounding box.",
             "Locate the title of subplot {subplot} and give its bounding box as "
             "[x_min, y_min, x_max, y_max]."}},
           {"x_axis_name",
            {"Where is the x-axis label \"{text}\" of subplot {subplot}? Answer with a bounding box.",
             "Give the bounding box of the x-axis name \"{text}\" in subplot {subplot}."}},
           {"y_axis_name",
            {"Where is the y-axis label \"{text}\" of subplot {subplot}? Answer with a bounding box.",
             "Give the bounding box of the y-axis name \"{text}\" in subplot {subplot}."}},
           {"x_tick",
            {"Where is the tick labeled \"{text}\" on the x-axis \"{axis}\" of subplot {subplot}? "
             "Answer with a bounding box.",
             "Locate the x-axis tick \"{text}\" of the axis \"{axis}\" in subplot {subplot} and give "
             "its bounding box."}},
           {"y_tick",
            {"Where is the tick labeled \"{text}\" on the y-axis \"{axis}\" of subplot {subplot}? "
             "Answer with a bounding box.",
             "Locate the y-axis tick \"{text}\" of the axis \"{axis}\" in subplot {subplot} and give "
             "its bounding box."}},
           {"legend",
            {"Where is the legend entry \"{text}\" in subplot {subplot}? Answer with a bounding box.",
             "Find the legend item \"{text}\" of subplot {subplot} and give its bounding box."}},
           {"other:subplot",
            {"Where is subplot {subplot}? Answer with a bounding box.",
             "Give the bounding box that encloses subplot {subplot}."}},
           {"other:annotation",
            {"Where is the annotation \"{text}\" in subplot {subplot}? Answer with a bounding box.",
             "Locate the text annotation \"{text}\" of subplot {subplot} and give its bounding box."}},
       }},
  };
  return sets;
}

constexpr std::array<std::string_view, 3> kChartToCodePrompts = {
    "Write Python matplotlib code that reproduces this chart.",
    "Generate the Python plotting code that renders the chart shown in the image.",
    "Convert this chart image into executable Python code using matplotlib.",
};

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

ordered_json boxes_json(const std::vector<BBox>& boxes) {
  ordered_json out = ordered_json::array();
  for (const auto& b : boxes) out.push_back({b.x_min(), b.y_min(), b.x_max(), b.y_max()});
  return out;
}

std::vector<BBox> boxes_from_json(const json& node, const std::string& path) {
  if (!node.is_array() || node.empty()) {
    throw Error(ErrorCode::kSchemaViolation, path + ": expected a non-empty array of boxes");
  }
  std::vector<BBox> out;
  for (const auto& q : node) {
    if (!q.is_array() || q.size() != 4 || !q[0].is_number() || !q[1].is_number() ||
        !q[2].is_number() || !q[3].is_number()) {
      throw Error(ErrorCode::kSchemaViolation, path + ": boxes are [x_min, y_min, x_max, y_max]");
    }
    auto b = BBox::try_make(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                            q[3].get<double>());
    if (!b) throw Error(ErrorCode::kSchemaViolation, path + ": degenerate box");
    out.push_back(*b);
  }
  return out;
}

void finalize(DatasetRecord& record) {
  validate_record(record);
  record.record_id = compute_record_id(record);
}

}  // namespace

std::string_view task_name(TaskKind task) {
  switch (task) {
    case TaskKind::kQa: return "qa";
    case TaskKind::kGrounding: return "grounding";
    case TaskKind::kChartToCode: return "chart_to_code";
  }
  return "qa";
}

std::optional<TaskKind> task_from_name(std::string_view name) {
  for (auto t : {TaskKind::kQa, TaskKind::kGrounding, TaskKind::kChartToCode}) {
    if (task_name(t) == name) return t;
  }
  return std::nullopt;
}

std::string_view scope_name(ReasoningScope scope) {
  return scope == ReasoningScope::kGlobal ? "global" : "local";
}

std::optional<ReasoningScope> scope_from_name(std::string_view name) {
  const auto lower = detail::to_lower(detail::trim(name));
  if (lower == "global") return ReasoningScope::kGlobal;
  if (lower == "local") return ReasoningScope::kLocal;
  return std::nullopt;
}

std::string_view split_name(Split split) { return split == Split::kSft ? "sft" : "rl"; }

void validate_record(const DatasetRecord& record) {
  const int payloads = (record.answer_text ? 1 : 0) + (record.answer_boxes ? 1 : 0) +
                       (record.answer_script ? 1 : 0);
  if (payloads != 1) {
    throw Error(ErrorCode::kSchemaViolation, "record must carry exactly one answer payload");
  }
  switch (record.task) {
    case TaskKind::kQa:
      if (!record.answer_text) throw Error(ErrorCode::kSchemaViolation, "qa record needs answer_text");
      break;
    case TaskKind::kGrounding:
      if (!record.answer_boxes) {
        throw Error(ErrorCode::kSchemaViolation, "grounding record needs answer_boxes");
      }
      if (record.answer_boxes->empty()) {
        throw Error(ErrorCode::kSchemaViolation, "answer_boxes must be non-empty");
      }
      break;
    case TaskKind::kChartToCode:
      if (!record.answer_script) {
        throw Error(ErrorCode::kSchemaViolation, "chart_to_code record needs answer_script");
      }
      break;
  }
}

std::string compute_record_id(const DatasetRecord& record) {
  ordered_json key = ordered_json::array();
  key.push_back(task_name(record.task));
  key.push_back(record.image_ref);
  key.push_back(record.question);
  if (record.answer_text) key.push_back(*record.answer_text);
  if (record.answer_boxes) key.push_back(boxes_json(*record.answer_boxes));
  if (record.answer_script) key.push_back(*record.answer_script);
  return sha256_hex(key.dump()).substr(0, 32);
}

std::string render_grounding_question(const SampledElement& element,
                                      std::string_view template_set_version) {
  const auto& sets = template_sets();
  auto set = std::find_if(sets.begin(), sets.end(),
                          [&](const TemplateSet& s) { return s.version == template_set_version; });
  if (set == sets.end()) {
    throw Error(ErrorCode::kUnknownCategory,
                "no template set '" + std::string(template_set_version) + "'");
  }
  const auto& box = element.element;
  std::string key(category_name(box.category));
  if (box.category == ElementCategory::kOther) key += ":" + box.group;
  auto it = set->by_category.find(key);
  if (it == set->by_category.end()) {
    throw Error(ErrorCode::kUnknownCategory, "no grounding template for category '" + key + "'");
  }
  const std::string subplot = std::to_string(element.subplot_index);
  const std::string selector =
      std::string(template_set_version) + "\x1f" + key + "\x1f" + box.group + "\x1f" + box.text +
      "\x1f" + subplot;
  const auto& variants = it->second;
  std::string question(variants[fnv1a64(selector) % variants.size()]);
  question = replace_all(std::move(question), "{subplot}", subplot);
  question = replace_all(std::move(question), "{axis}", box.group);
  question = replace_all(std::move(question), "{text}", box.text);
  return question;
}

DatasetRecord grounding_record(const SampledElement& element, std::string_view image_ref,
                               std::string_view template_set_version) {
  DatasetRecord r;
  r.task = TaskKind::kGrounding;
  r.image_ref = std::string(image_ref);
  r.question = render_grounding_question(element, template_set_version);
  r.answer_boxes = std::vector<BBox>{element.element.box};
  r.provenance["template_set_version"] = std::string(template_set_version);
  r.provenance["element_category"] = std::string(category_name(element.element.category));
  r.provenance["subplot_index"] = std::to_string(element.subplot_index);
  finalize(r);
  return r;
}

std::size_t chart_to_code_prompt_count() { return kChartToCodePrompts.size(); }

DatasetRecord chart_to_code_record(std::string_view script, std::string_view image_ref,
                                   std::optional<std::size_t> prompt_index) {
  if (detail::trim(script).empty()) throw Error(ErrorCode::kEmptyScript, "script is empty");
  if (prompt_index && *prompt_index >= kChartToCodePrompts.size()) {
    throw Error(ErrorCode::kInvalidArgument, "prompt index out of range");
  }
  const std::size_t index = prompt_index.value_or(fnv1a64(script) % kChartToCodePrompts.size());
  DatasetRecord r;
  r.task = TaskKind::kChartToCode;
  r.image_ref = std::string(image_ref);
  r.question = std::string(kChartToCodePrompts[index]);
  r.answer_script = std::string(script);
  r.provenance["prompt_index"] = std::to_string(index);
  finalize(r);
  return r;
}

DatasetRecord qa_record(std::string_view question, std::string_view answer, ReasoningScope scope,
                        std::string_view image_ref) {
  DatasetRecord r;
  r.task = TaskKind::kQa;
  r.image_ref = std::string(image_ref);
  r.question = std::string(question);
  r.answer_text = std::string(answer);
  r.reasoning_scope = scope;
  finalize(r);
  return r;
}

QaParseResult parse_qa_generation(std::string_view model_output) {
  // Prefer fenced blocks, then the raw text; take the first span that parses
  // as a JSON array.
  std::vector<std::string> sources;
  for (auto& block : detail::fenced_blocks(model_output)) sources.push_back(std::move(block.body));
  sources.emplace_back(model_output);

  std::optional<json> array;
  for (const auto& src : sources) {
    for (auto span : detail::balanced_spans(src, '[')) {
      auto parsed = json::parse(span, nullptr, /*allow_exceptions=*/false);
      if (!parsed.is_discarded() && parsed.is_array()) {
        array = std::move(parsed);
        break;
      }
    }
    if (array) break;
  }
  if (!array) throw Error(ErrorCode::kNoParseableContent, "no JSON array of QA pairs found");

  QaParseResult result;
  for (const auto& item : *array) {
    std::optional<QaPair> pair;
    if (item.is_object() && item.contains("question") && item.contains("answer") &&
        item.contains("scope") && item.at("question").is_string() && item.at("scope").is_string()) {
      const auto& a = item.at("answer");
      std::optional<std::string> answer;
      if (a.is_string()) {
        answer = a.get<std::string>();
      } else if (a.is_number()) {
        answer = a.dump();
      }
      const auto scope = scope_from_name(item.at("scope").get<std::string>());
      const auto question = std::string(detail::trim(item.at("question").get<std::string>()));
      if (answer && scope && !question.empty() && !detail::trim(*answer).empty()) {
        pair = QaPair{question, std::string(detail::trim(*answer)), *scope};
      }
    }
    if (!pair) {
      ++result.dropped_invalid;
    } else if (result.pairs.size() >= kMaxQaPairs) {
      ++result.dropped_truncated;
    } else {
      result.pairs.push_back(std::move(*pair));
    }
  }
  if (result.pairs.empty()) {
    throw Error(ErrorCode::kNoParseableContent, "no QA pair satisfies the output grammar");
  }
  return result;
}

std::string format_box(const BBox& box) {
  return "[" + detail::format_double(box.x_min()) + ", " + detail::format_double(box.y_min()) +
         ", " + detail::format_double(box.x_max()) + ", " + detail::format_double(box.y_max()) + "]";
}

std::string answer_body(const DatasetRecord& record) {
  validate_record(record);
  switch (record.task) {
    case TaskKind::kQa: return *record.answer_text;
    case TaskKind::kGrounding: {
      std::string out;
      for (const auto& b : *record.answer_boxes) {
        if (!out.empty()) out += ", ";
        out += format_box(b);
      }
      return out;
    }
    case TaskKind::kChartToCode: {
      std::string script = *record.answer_script;
      if (script.empty() || script.back() != '\n') script.push_back('\n');
      return "```python\n" + script + "```";
    }
  }
  return {};
}

std::string render_response(std::string_view think, std::string_view body) {
  std::string out = "<think>";
  out += think;
  out += "</think><answer>";
  out += body;
  out += "</answer>";
  return out;
}

std::string record_to_json(const DatasetRecord& r) {
  ordered_json doc;
  doc["record_id"] = r.record_id;
  doc["task"] = task_name(r.task);
  doc["image_ref"] = r.image_ref;
  doc["question"] = r.question;
  doc["answer_text"] = r.answer_text ? ordered_json(*r.answer_text) : ordered_json(nullptr);
  doc["answer_boxes"] = r.answer_boxes ? boxes_json(*r.answer_boxes) : ordered_json(nullptr);
  doc["answer_script"] = r.answer_script ? ordered_json(*r.answer_script) : ordered_json(nullptr);
  doc["reasoning_scope"] =
      r.reasoning_scope ? ordered_json(scope_name(*r.reasoning_scope)) : ordered_json(nullptr);
  doc["split"] = split_name(r.split);
  doc["provenance"] = ordered_json::object();
  for (const auto& [k, v] : r.provenance) doc["provenance"][k] = v;
  return doc.dump();
}

DatasetRecord record_from_json(std::string_view line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedJson, e.what());
  }
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kSchemaViolation, why); };
  if (!doc.is_object()) fail("record must be a JSON object");
  auto str = [&](const char* key) -> std::string {
    if (!doc.contains(key) || !doc.at(key).is_string()) fail(std::string(key) + ": expected a string");
    return doc.at(key).get<std::string>();
  };
  auto present = [&](const char* key) { return doc.contains(key) && !doc.at(key).is_null(); };

  DatasetRecord r;
  r.record_id = str("record_id");
  if (r.record_id.empty()) fail("record_id: must be non-empty");
  const auto task = task_from_name(str("task"));
  if (!task) fail("task: expected qa, grounding or chart_to_code");
  r.task = *task;
  r.image_ref = str("image_ref");
  r.question = str("question");
  if (present("answer_text")) r.answer_text = str("answer_text");
  if (present("answer_boxes")) r.answer_boxes = boxes_from_json(doc.at("answer_boxes"), "answer_boxes");
  if (present("answer_script")) r.answer_script = str("answer_script");
  if (present("reasoning_scope")) {
    const auto raw = str("reasoning_scope");
    if (raw != "global" && raw != "local") fail("reasoning_scope: expected global or local");
    r.reasoning_scope = *scope_from_name(raw);
  }
  const auto split = str("split");
  if (split == "sft") {
    r.split = Split::kSft;
  } else if (split == "rl") {
    r.split = Split::kRl;
  } else {
    fail("split: expected sft or rl");
  }
  if (present("provenance")) {
    if (!doc.at("provenance").is_object()) fail("provenance: expected an object");
    for (const auto& [k, v] : doc.at("provenance").items()) {
      r.provenance[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  validate_record(r);
  return r;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, bool append) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out_) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
}

void JsonlWriter::write(const DatasetRecord& record) {
  out_ << record_to_json(record) << '\n';
  if (!out_) throw Error(ErrorCode::kIo, "write failed");
}

void JsonlWriter::flush() { out_.flush(); }

void write_jsonl(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
  std::string content;
  for (const auto& r : records) {
    content += record_to_json(r);
    content.push_back('\n');
  }
  detail::write_file_atomic(path, content);
}

std::vector<DatasetRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(record_from_json(line));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(number) + ": " + e.detail());
    }
  }
  return out;
}

}  // namespace chartground
