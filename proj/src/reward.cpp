// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartground/reward.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>

#include "chartground/error.hpp"
#include "text_util.hpp"

namespace chartground {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

// std::regex recurses per character; longer grounding bodies are rejected
// before matching.
constexpr std::size_t kMaxGroundingBody = 4096;

#define CG_NUM R"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
#define CG_QUAD R"(\[\s*()" CG_NUM R"()\s*,\s*()" CG_NUM R"()\s*,\s*()" CG_NUM R"()\s*,\s*()" CG_NUM R"()\s*\])"

const std::regex& quad_regex() {
  static const std::regex re(CG_QUAD);
  return re;
}

const std::regex& box_list_regex() {
  static const std::regex re(R"(^(?:)" CG_QUAD R"((?:\s*,?\s*)" CG_QUAD R"()*|\[\s*)" CG_QUAD
                             R"((?:\s*,?\s*)" CG_QUAD R"()*\s*\])$)");
  return re;
}

std::size_t count(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

/// Splits "<think>T</think><answer>A</answer>" (whitespace allowed around
/// and between the blocks). Returns the answer body.
std::optional<std::string_view> canonical_answer_body(std::string_view text) {
  for (auto tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
    if (count(text, tag) != 1) return std::nullopt;
  }
  const auto t = detail::trim(text);
  if (t.substr(0, kThinkOpen.size()) != kThinkOpen) return std::nullopt;
  const auto think_close = t.find(kThinkClose);
  const auto answer_open = t.find(kAnswerOpen);
  const auto answer_close = t.find(kAnswerClose);
  if (!(think_close < answer_open && answer_open < answer_close)) return std::nullopt;
  const auto between = t.substr(think_close + kThinkClose.size(),
                                answer_open - think_close - kThinkClose.size());
  if (!detail::trim(between).empty()) return std::nullopt;
  if (answer_close + kAnswerClose.size() != t.size()) return std::nullopt;
  const auto body_start = answer_open + kAnswerOpen.size();
  return t.substr(body_start, answer_close - body_start);
}

std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string normalize_axis_key(std::string_view key) {
  std::string out;
  for (char c : detail::to_lower(detail::trim(key))) {
    if (c == '_' || c == '-') c = ' ';
    if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
    out.push_back(c);
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::optional<json> find_verdict_object(std::string_view text) {
  std::vector<std::string> sources{std::string(detail::trim(text))};
  for (auto& block : detail::fenced_blocks(text)) sources.push_back(std::move(block.body));
  for (const auto& src : sources) {
    auto whole = json::parse(src, nullptr, false);
    if (!whole.is_discarded() && whole.is_object()) return whole;
    for (auto span : detail::balanced_spans(src, '{')) {
      auto parsed = json::parse(span, nullptr, false);
      if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    }
  }
  return std::nullopt;
}

}  // namespace

double RewardConfig::weight_for(TaskKind task) const {
  auto it = task_accuracy_weight.find(task);
  return it != task_accuracy_weight.end() ? it->second : accuracy_weight;
}

void RewardConfig::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(accuracy_weight)) throw Error(ErrorCode::kInvalidArgument, "accuracy weight must be in [0, 1]");
  for (const auto& [task, w] : task_accuracy_weight) {
    if (!unit(w)) throw Error(ErrorCode::kInvalidArgument, "accuracy weight must be in [0, 1]");
  }
  if (judge_axes.size() != 5) throw Error(ErrorCode::kInvalidArgument, "judge needs exactly five axes");
  if (judge_max_per_axis < 1) throw Error(ErrorCode::kInvalidArgument, "judge max score must be positive");
  if (!(group_std_epsilon > 0.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be positive");
}

int format_reward(const RolloutResponse& response) {
  const auto body = canonical_answer_body(response.raw_text);
  if (!body) return 0;
  switch (response.task) {
    case TaskKind::kQa: return 1;
    case TaskKind::kGrounding: {
      const auto b = detail::trim(*body);
      if (b.size() > kMaxGroundingBody) return 0;
      return std::regex_match(b.begin(), b.end(), box_list_regex()) ? 1 : 0;
    }
    case TaskKind::kChartToCode:
      return detail::fence_line_count(*body) == 2 && detail::fenced_blocks(*body).size() == 1 ? 1 : 0;
  }
  return 0;
}

AnswerPayload extract_answer(const RolloutResponse& response) {
  const std::string_view text = response.raw_text;
  const auto open = text.rfind(kAnswerOpen);
  if (open == std::string_view::npos) throw Error(ErrorCode::kNoAnswerBlock, "no <answer> tag");
  const auto body_start = open + kAnswerOpen.size();
  const auto close = text.find(kAnswerClose, body_start);
  if (close == std::string_view::npos) throw Error(ErrorCode::kNoAnswerBlock, "unterminated <answer>");
  const auto body = text.substr(body_start, close - body_start);

  switch (response.task) {
    case TaskKind::kQa: return std::string(detail::trim(body));
    case TaskKind::kGrounding: {
      std::vector<BBox> boxes;
      const std::string b(body);
      for (std::sregex_iterator it(b.begin(), b.end(), quad_regex()), end; it != end; ++it) {
        double v[4];
        for (int i = 0; i < 4; ++i) {
          auto parsed = parse_number((*it)[i + 1].str());
          if (!parsed) throw Error(ErrorCode::kUnparseableBox, "bad coordinate in " + it->str());
          v[i] = *parsed;
        }
        auto box = BBox::try_make(v[0], v[1], v[2], v[3]);
        if (!box) throw Error(ErrorCode::kUnparseableBox, "invalid box " + it->str());
        boxes.push_back(*box);
      }
      if (boxes.empty()) throw Error(ErrorCode::kUnparseableBox, "no [x1,y1,x2,y2] box in answer");
      return boxes;
    }
    case TaskKind::kChartToCode: {
      auto blocks = detail::fenced_blocks(body);
      if (blocks.empty()) return std::string(detail::trim(body));
      auto longest = std::max_element(blocks.begin(), blocks.end(), [](const auto& a, const auto& b) {
        return a.body.size() < b.body.size();
      });
      return longest->body;
    }
  }
  return std::string();
}

std::string normalize_answer(std::string_view text) {
  std::string current(text);
  for (;;) {
    std::string next = detail::to_lower(detail::trim(current));
    if (next.size() >= 2) {
      const char f = next.front();
      if ((f == '"' || f == '\'' || f == '`') && next.back() == f) next = next.substr(1, next.size() - 2);
    }
    while (!next.empty() && next.back() == '.') next.pop_back();
    if (!next.empty() && next.back() == '%') next.pop_back();
    // Multiple-choice letters: "(b)" and "b)" read as "b".
    if (next.size() == 3 && next[0] == '(' && next[2] == ')' && std::isalpha(static_cast<unsigned char>(next[1]))) {
      next = next.substr(1, 1);
    } else if (next.size() == 2 && next[1] == ')' && std::isalpha(static_cast<unsigned char>(next[0]))) {
      next = next.substr(0, 1);
    }
    next = std::string(detail::trim(next));
    if (next == current) return next;
    current = std::move(next);
  }
}

int answer_accuracy(std::string_view pred_text, std::string_view gt_text) {
  const auto pred = normalize_answer(pred_text);
  const auto gt = normalize_answer(gt_text);
  const auto pv = parse_number(pred);
  const auto gv = parse_number(gt);
  if (pv && gv) {
    const double scale = std::max(std::fabs(*pv), std::fabs(*gv));
    return std::fabs(*pv - *gv) <= std::max(1e-4 * scale, 1e-6) ? 1 : 0;
  }
  return pred == gt ? 1 : 0;
}

double grounding_reward(std::span<const BBox> pred_boxes, const BBox& gt_box) {
  if (pred_boxes.empty()) return 0.0;
  return iou(pred_boxes.front(), gt_box);
}

JudgeVerdict parse_judge_verdict(std::string_view judge_text, const RewardConfig& cfg) {
  const auto object = find_verdict_object(judge_text);
  if (!object) throw Error(ErrorCode::kJudgeParseError, "no JSON object in judge output");
  std::map<std::string, const json*> by_key;
  for (const auto& [key, value] : object->items()) by_key[normalize_axis_key(key)] = &value;

  JudgeVerdict verdict;
  int total = 0;
  for (const auto& axis : cfg.judge_axes) {
    auto it = by_key.find(normalize_axis_key(axis));
    if (it == by_key.end()) throw Error(ErrorCode::kJudgeParseError, "missing axis '" + axis + "'");
    const json& v = *it->second;
    long long score = 0;
    if (v.is_number_integer()) {
      score = v.get<long long>();
    } else if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() &&
               std::fabs(v.get<double>()) < 1e9) {
      score = static_cast<long long>(v.get<double>());
    } else {
      throw Error(ErrorCode::kJudgeParseError, "axis '" + axis + "' is not an integer score");
    }
    const int clamped = static_cast<int>(std::clamp<long long>(score, 0, cfg.judge_max_per_axis));
    verdict.scores.push_back(clamped);
    total += clamped;
  }
  verdict.reward = static_cast<double>(total) /
                   static_cast<double>(cfg.judge_axes.size() * static_cast<std::size_t>(cfg.judge_max_per_axis));
  return verdict;
}

double code_reward(std::string_view judge_text, const RewardConfig& cfg) {
  return parse_judge_verdict(judge_text, cfg).reward;
}

RewardBreakdown final_reward(double accuracy, int format, const RewardConfig& cfg, TaskKind task) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "accuracy reward must lie in [0, 1]");
  }
  if (format != 0 && format != 1) throw Error(ErrorCode::kInvalidArgument, "format reward is 0 or 1");
  const double a = cfg.weight_for(task);
  RewardBreakdown out;
  out.accuracy = accuracy;
  out.format = static_cast<double>(format);
  out.final = std::clamp(a * accuracy + (1.0 - a) * out.format, 0.0, 1.0);
  return out;
}

std::vector<double> group_advantages(std::span<const double> rewards, const RewardConfig& cfg) {
  if (rewards.size() < 2) throw Error(ErrorCode::kGroupTooSmall, "a group needs at least two rollouts");
  std::vector<double> out(rewards.size(), 0.0);
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return out;
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double sq = 0.0;
  for (double r : rewards) sq += (r - mean) * (r - mean);
  const double denom = std::sqrt(sq / n) + cfg.group_std_epsilon;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / denom;
  return out;
}

double accuracy_reward(const RolloutResponse& response, const GroundTruth& gt) {
  try {
    if (response.task == TaskKind::kQa) {
      const auto* text = std::get_if<std::string>(&gt);
      if (!text) throw Error(ErrorCode::kInvalidArgument, "qa ground truth must be text");
      return answer_accuracy(std::get<std::string>(extract_answer(response)), *text);
    }
    if (response.task == TaskKind::kGrounding) {
      const auto* box = std::get_if<BBox>(&gt);
      if (!box) throw Error(ErrorCode::kInvalidArgument, "grounding ground truth must be a box");
      const auto boxes = std::get<std::vector<BBox>>(extract_answer(response));
      return grounding_reward(boxes, *box);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNoAnswerBlock || e.code() == ErrorCode::kUnparseableBox) return 0.0;
    throw;
  }
  throw Error(ErrorCode::kInvalidArgument, "chart_to_code accuracy needs a judge verdict");
}

std::vector<ScoredRollout> score_group(TaskKind task, const std::optional<GroundTruth>& gt,
                                       std::span<const std::string> rollouts,
                                       std::span<const std::string> judge_texts,
                                       const RewardConfig& cfg, bool judge_errors_as_zero) {
  if (rollouts.size() < 2) throw Error(ErrorCode::kGroupTooSmall, "a group needs at least two rollouts");
  std::vector<ScoredRollout> out(rollouts.size());
  std::vector<double> finals;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const RolloutResponse response{task, rollouts[i]};
    double acc = 0.0;
    if (task == TaskKind::kChartToCode) {
      if (i >= judge_texts.size()) throw Error(ErrorCode::kInvalidArgument, "missing judge verdict");
      try {
        acc = code_reward(judge_texts[i], cfg);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kJudgeParseError || !judge_errors_as_zero) throw;
        out[i].judge_error = e.detail();
      }
    } else {
      if (!gt) throw Error(ErrorCode::kInvalidArgument, "missing ground truth");
      acc = accuracy_reward(response, *gt);
      if (task == TaskKind::kGrounding && !cfg.iou_as_reward) acc = acc >= 0.5 ? 1.0 : 0.0;
    }
    out[i].reward = final_reward(acc, format_reward(response), cfg, task);
    finals.push_back(out[i].reward.final);
  }
  const auto adv = group_advantages(finals, cfg);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].advantage = adv[i];
  return out;
}

RolloutFileSummary score_rollout_file(const std::filesystem::path& in,
                                      const std::filesystem::path& out, const RewardConfig& cfg,
                                      const JudgeFn& judge, bool judge_errors_as_zero) {
  cfg.validate();
  std::ifstream input(in, std::ios::binary);
  if (!input) throw Error(ErrorCode::kIo, "cannot open " + in.string());

  RolloutFileSummary summary;
  std::string content;
  std::string line;
  std::size_t number = 0;
  while (std::getline(input, line)) {
    ++number;
    if (detail::trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(number) + ": ";
    try {
      json doc;
      try {
        doc = json::parse(line);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::kMalformedJson, e.what());
      }
      auto fail = [](const std::string& why) { throw Error(ErrorCode::kSchemaViolation, why); };
      if (!doc.is_object()) fail("expected an object");
      if (!doc.contains("record_id") || !doc["record_id"].is_string()) fail("record_id: expected a string");
      if (!doc.contains("task") || !doc["task"].is_string()) fail("task: expected a string");
      const auto task = task_from_name(doc["task"].get<std::string>());
      if (!task) fail("task: expected qa, grounding or chart_to_code");
      if (!doc.contains("rollouts") || !doc["rollouts"].is_array()) fail("rollouts: expected an array");
      std::vector<std::string> rollouts;
      for (const auto& r : doc["rollouts"]) {
        if (!r.is_string()) fail("rollouts: expected strings");
        rollouts.push_back(r.get<std::string>());
      }

      std::optional<GroundTruth> gt;
      std::vector<std::string> judge_texts;
      if (*task == TaskKind::kQa) {
        if (!doc.contains("gt_text") || !doc["gt_text"].is_string()) fail("gt_text: expected a string");
        gt = doc["gt_text"].get<std::string>();
      } else if (*task == TaskKind::kGrounding) {
        const json* q = doc.contains("gt_box") ? &doc["gt_box"] : nullptr;
        if (!q || !q->is_array() || q->size() != 4) fail("gt_box: expected [x_min, y_min, x_max, y_max]");
        for (const auto& v : *q) {
          if (!v.is_number()) fail("gt_box: coordinates must be numbers");
        }
        auto box = BBox::try_make((*q)[0].get<double>(), (*q)[1].get<double>(), (*q)[2].get<double>(),
                                  (*q)[3].get<double>());
        if (!box) fail("gt_box: degenerate box");
        gt = *box;
      } else {
        if (doc.contains("judge_texts")) {
          if (!doc["judge_texts"].is_array() || doc["judge_texts"].size() != rollouts.size()) {
            fail("judge_texts: expected one verdict per rollout");
          }
          for (const auto& j : doc["judge_texts"]) {
            if (!j.is_string()) fail("judge_texts: expected strings");
            judge_texts.push_back(j.get<std::string>());
          }
        } else {
          if (!doc.contains("gt_script") || !doc["gt_script"].is_string()) {
            fail("gt_script: expected a string");
          }
          if (!judge) throw Error(ErrorCode::kInvalidArgument, "no judge available for chart_to_code");
          const auto reference = doc["gt_script"].get<std::string>();
          for (const auto& r : rollouts) {
            std::string candidate;
            try {
              candidate = std::get<std::string>(extract_answer({TaskKind::kChartToCode, r}));
            } catch (const Error& e) {
              if (e.code() != ErrorCode::kNoAnswerBlock) throw;
            }
            // An empty candidate is still judged; the verdict decides.
            judge_texts.push_back(judge(candidate, reference));
          }
        }
      }

      const auto scored = score_group(*task, gt, rollouts, judge_texts, cfg, judge_errors_as_zero);
      ++summary.groups;
      for (std::size_t i = 0; i < scored.size(); ++i) {
        ordered_json row;
        row["record_id"] = doc["record_id"];
        row["task"] = task_name(*task);
        row["rollout_index"] = i;
        row["accuracy"] = scored[i].reward.accuracy;
        row["format"] = scored[i].reward.format;
        row["final"] = scored[i].reward.final;
        row["advantage"] = scored[i].advantage;
        if (scored[i].judge_error) {
          row["judge_error"] = *scored[i].judge_error;
          ++summary.judge_errors;
        }
        content += row.dump();
        content.push_back('\n');
        ++summary.lines_written;
      }
    } catch (const Error& e) {
      throw Error(e.code(), where + e.detail());
    }
  }
  detail::write_file_atomic(out, content);
  return summary;
}

}  // namespace chartground
