// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "chartground/annotation.hpp"
#include "chartground/error.hpp"
#include "chartground/reward.hpp"
#include "support.hpp"

using namespace chartground;
using nlohmann::json;

namespace {

const RewardConfig kCfg{};

std::string verdict(const std::array<int, 5>& s) {
  json j;
  for (std::size_t i = 0; i < 5; ++i) j[std::string(kJudgeAxes[i])] = s[i];
  return j.dump();
}

ErrorCode judge_error(std::string_view text) {
  try {
    code_reward(text, kCfg);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected judge failure");
  return ErrorCode::kInvalidArgument;
}

// Independent mean / population std.
std::vector<double> oracle_advantages(const std::vector<double>& r, double eps) {
  long double sum = 0;
  for (double x : r) sum += x;
  const long double mean = sum / r.size();
  long double var = 0;
  for (double x : r) var += (x - mean) * (x - mean);
  const long double sd = std::sqrt(var / r.size());
  std::vector<double> out;
  for (double x : r) out.push_back(static_cast<double>((x - mean) / (sd + eps)));
  return out;
}

}  // namespace

TEST_CASE("format reward decision table") {
  std::istringstream in(testing::slurp(testing::fixture("format_reward_cases.jsonl")));
  int cases = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto c = json::parse(line);
    const auto task = task_from_name(c["task"].get<std::string>());
    REQUIRE(task);
    CHECK_MESSAGE(format_reward({*task, c["text"].get<std::string>()}) == c["expected"].get<int>(),
                  "case " << c["id"] << ": " << c["note"].get<std::string>());
    ++cases;
  }
  CHECK(cases == 20);
}

TEST_CASE("format reward rejects oversized grounding bodies") {
  std::string body;
  while (body.size() < 5000) body += "[1,2,3,4] ";
  CHECK(format_reward({TaskKind::kGrounding, "<think>t</think><answer>" + body + "</answer>"}) == 0);
}

TEST_CASE("own serializers always satisfy the format") {
  std::vector<DatasetRecord> records;
  records.push_back(qa_record("How many?", "4", ReasoningScope::kLocal, "a.png"));
  records.push_back(qa_record("Which?", "Q3 2021 (est.)", ReasoningScope::kGlobal, "a.png"));
  records.push_back(grounding_record({0, LabeledBox{BBox(0.5, 1.25, 100, 200.75), "T", ElementCategory::kTitle, ""}}, "a.png"));
  records.push_back(grounding_record({2, LabeledBox{BBox(1e-3, 0, 639.999, 479), "2020", ElementCategory::kXTick, "x-axis"}}, "a.png"));
  records.push_back(chart_to_code_record(testing::slurp(std::filesystem::path(CHARTGROUND_ASSET_DIR) / "seed_evolved/multi_subplot.py"), "a.png"));
  for (const auto& r : records) {
    const auto text = render_response("reasoning", answer_body(r));
    CHECK(format_reward({r.task, text}) == 1);
    const auto payload = extract_answer({r.task, text});
    if (r.task == TaskKind::kGrounding) CHECK(std::get<std::vector<BBox>>(payload) == *r.answer_boxes);
    if (r.task == TaskKind::kQa) CHECK(std::get<std::string>(payload) == *r.answer_text);
    if (r.task == TaskKind::kChartToCode) CHECK(std::get<std::string>(payload) == *r.answer_script);
  }
}

TEST_CASE("extract answer") {
  CHECK(std::get<std::string>(extract_answer({TaskKind::kQa, "<think>t</think><answer>  0.75 </answer>"})) == "0.75");
  const auto boxes = std::get<std::vector<BBox>>(
      extract_answer({TaskKind::kGrounding, "<think>t</think><answer>[1,2,3,4] [5,6,9,9]</answer>"}));
  REQUIRE(boxes.size() == 2);
  CHECK(boxes[1] == BBox(5, 6, 9, 9));
  try {
    extract_answer({TaskKind::kGrounding, "<think>t</think><answer>[3,4,1,2]</answer>"});
    FAIL("expected UnparseableBox");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnparseableBox);
  }
  try {
    extract_answer({TaskKind::kQa, "just text"});
    FAIL("expected NoAnswerBlock");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoAnswerBlock);
  }
  // Last block wins.
  CHECK(std::get<std::string>(extract_answer({TaskKind::kQa, "<answer>a</answer><answer>b</answer>"})) == "b");
}

TEST_CASE("answer accuracy") {
  CHECK(answer_accuracy("42.0", "42") == 1);
  CHECK(std::stod("42.0") == std::stod("42"));
  CHECK(answer_accuracy("Blue", "blue.") == 1);
  CHECK(answer_accuracy("0.751", "0.75") == 0);
  CHECK(std::abs(0.751 - 0.75) / 0.75 > 1e-4);
  CHECK(answer_accuracy("0.75001", "0.75") == 1);
  CHECK(answer_accuracy("45%", "45") == 1);
  CHECK(answer_accuracy("'yes'", "Yes") == 1);
  CHECK(answer_accuracy("(B)", "b") == 1);
  CHECK(answer_accuracy("1e-7", "0") == 1);
  CHECK(answer_accuracy("red", "blue") == 0);
  CHECK(answer_accuracy("", "0") == 0);
}

TEST_CASE("answer accuracy is symmetric and normalization idempotent") {
  const std::vector<std::string> samples{"42", "42.0", " Blue. ", "\"blue\"", "45%", "(c)", "C", "0.75",
                                         "0.751", "Q3", "q3.", "", "1,000", "-0", "0"};
  for (const auto& a : samples) {
    CHECK(normalize_answer(normalize_answer(a)) == normalize_answer(a));
    for (const auto& b : samples) CHECK(answer_accuracy(a, b) == answer_accuracy(b, a));
  }
}

TEST_CASE("grounding reward") {
  const BBox gt(5, 0, 15, 10);
  const std::vector<BBox> exact{gt};
  CHECK(grounding_reward(exact, gt) == 1.0);
  CHECK(grounding_reward({}, gt) == 0.0);
  const std::vector<BBox> left{BBox(0, 0, 10, 10), gt};
  CHECK(std::abs(grounding_reward(left, gt) - testing::pixel_iou(BBox(0, 0, 10, 10), gt)) < 1e-12);
}

TEST_CASE("code reward") {
  CHECK(code_reward(verdict({5, 5, 5, 5, 5}), kCfg) == 1.0);
  CHECK(code_reward(verdict({0, 0, 0, 0, 0}), kCfg) == 0.0);
  CHECK(code_reward(verdict({5, 4, 3, 2, 1}), kCfg) == doctest::Approx(15.0 / 25.0));
  CHECK(code_reward(verdict({9, -3, 5, 5, 5}), kCfg) == doctest::Approx(20.0 / 25.0));
  CHECK(code_reward("Verdict:\n```json\n{\"Data\": 5, \"plot_type_structure\": 5, \"axes-scales-and-limits\": 5, "
                    "\"text elements\": 5, \"styling\": 5}\n```",
                    kCfg) == 1.0);
}

TEST_CASE("judge parse failures are surfaced") {
  CHECK(judge_error("looks good, 5/5") == ErrorCode::kJudgeParseError);
  CHECK(judge_error(R"({"data":5,"plot type structure":5,"axes scales and limits":5,"text elements":5})") ==
        ErrorCode::kJudgeParseError);
  CHECK(judge_error(R"({"data":4.5,"plot type structure":5,"axes scales and limits":5,"text elements":5,"styling":5})") ==
        ErrorCode::kJudgeParseError);
  CHECK(judge_error(R"({"data":"5","plot type structure":5,"axes scales and limits":5,"text elements":5,"styling":5})") ==
        ErrorCode::kJudgeParseError);
}

TEST_CASE("judge normalization over every score combination") {
  std::array<int, 5> s{};
  int combos = 0;
  for (s[0] = 0; s[0] <= 5; ++s[0])
    for (s[1] = 0; s[1] <= 5; ++s[1])
      for (s[2] = 0; s[2] <= 5; ++s[2])
        for (s[3] = 0; s[3] <= 5; ++s[3])
          for (s[4] = 0; s[4] <= 5; ++s[4]) {
            const double expect = (s[0] + s[1] + s[2] + s[3] + s[4]) / 25.0;
            REQUIRE(code_reward(verdict(s), kCfg) == expect);
            ++combos;
          }
  CHECK(combos == 7776);
}

TEST_CASE("final reward") {
  CHECK(final_reward(1, 1, kCfg).final == 1.0);
  CHECK(final_reward(0, 1, kCfg).final == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(final_reward(0.5, 0, kCfg).final == doctest::Approx(0.45).epsilon(1e-15));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double acc = u(rng);
    const int fmt = static_cast<int>(rng() & 1);
    const auto r = final_reward(acc, fmt, kCfg);
    REQUIRE(std::abs(r.final - (0.9 * acc + 0.1 * fmt)) <= 1e-12);
    CHECK(r.final >= 0.0);
    CHECK(r.final <= 1.0);
    CHECK(final_reward(std::min(1.0, acc + 0.01), fmt, kCfg).final >= r.final);
    CHECK(final_reward(acc, 1, kCfg).final >= final_reward(acc, 0, kCfg).final);
  }
  CHECK_THROWS_AS(final_reward(1.5, 1, kCfg), Error);
  CHECK_THROWS_AS(final_reward(0.5, 2, kCfg), Error);
}

TEST_CASE("per-task accuracy weight") {
  RewardConfig cfg;
  cfg.task_accuracy_weight[TaskKind::kGrounding] = 0.5;
  CHECK(final_reward(1, 0, cfg, TaskKind::kGrounding).final == 0.5);
  CHECK(final_reward(1, 0, cfg, TaskKind::kQa).final == 0.9);
  cfg.accuracy_weight = 1.2;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("group advantages") {
  CHECK(group_advantages(std::vector<double>(5, 1.0), kCfg) == std::vector<double>(5, 0.0));
  CHECK(group_advantages(std::vector<double>(5, 0.37), kCfg) == std::vector<double>(5, 0.0));
  const auto two = group_advantages(std::vector<double>{1, 0}, kCfg);
  CHECK(two[0] == doctest::Approx(0.5 / (0.5 + 1e-6)).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(-0.5 / (0.5 + 1e-6)).epsilon(1e-12));
  const auto five = group_advantages(std::vector<double>{1, 0, 0, 0, 1}, kCfg);
  const double expect_hi = 0.6 / std::sqrt(0.24), expect_lo = -0.4 / std::sqrt(0.24);
  CHECK(std::abs(five[0] - 1.2247) < 1e-3);
  CHECK(std::abs(five[1] + 0.8165) < 1e-3);
  CHECK(std::abs(five[4] - expect_hi) < 1e-5);
  CHECK(std::abs(five[2] - expect_lo) < 1e-5);
  try {
    group_advantages(std::vector<double>{1}, kCfg);
    FAIL("expected GroupTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kGroupTooSmall);
  }
}

TEST_CASE("group advantages agree with an independent computation") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> r(2 + t % 7);
    for (auto& x : r) x = u(rng);
    const auto got = group_advantages(r, kCfg);
    const auto want = oracle_advantages(r, 1e-6);
    double sum = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK(std::abs(got[i] - want[i]) < 1e-9);
      sum += got[i];
    }
    CHECK(std::abs(sum) < 1e-9);
  }
}

TEST_CASE("scoring groups") {
  const std::vector<std::string> rollouts{"<think>a</think><answer>[5,0,15,10]</answer>",
                                          "<think>a</think><answer>[0,0,10,10]</answer>", "nonsense"};
  auto scored = score_group(TaskKind::kGrounding, GroundTruth{BBox(5, 0, 15, 10)}, rollouts, {}, kCfg, false);
  CHECK(scored[0].reward.final == 1.0);
  CHECK(scored[1].reward.accuracy == doctest::Approx(1.0 / 3.0));
  CHECK(scored[2].reward.final == 0.0);
  CHECK(scored[0].advantage > 0);
  CHECK(scored[2].advantage < 0);

  RewardConfig binary;
  binary.iou_as_reward = false;
  scored = score_group(TaskKind::kGrounding, GroundTruth{BBox(5, 0, 15, 10)}, rollouts, {}, binary, false);
  CHECK(scored[1].reward.accuracy == 0.0);

  const std::vector<std::string> code{"<think>a</think><answer>```python\nx\n```</answer>", "x"};
  const std::vector<std::string> bad_judge{verdict({5, 5, 5, 5, 5}), "no idea"};
  CHECK_THROWS_AS(score_group(TaskKind::kChartToCode, std::nullopt, code, bad_judge, kCfg, false), Error);
  scored = score_group(TaskKind::kChartToCode, std::nullopt, code, bad_judge, kCfg, true);
  CHECK(scored[1].judge_error.has_value());
  CHECK(scored[1].reward.accuracy == 0.0);
}

TEST_CASE("rollout file scoring") {
  testing::TempDir dir;
  const auto out = dir / "scored.jsonl";
  const auto s = score_rollout_file(testing::fixture("rollouts_5x5.jsonl"), out, kCfg, nullptr, false);
  CHECK(s.groups == 5);
  CHECK(s.lines_written == 25);
  std::istringstream in(testing::slurp(out));
  std::vector<json> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(json::parse(line));
  REQUIRE(rows.size() == 25);
  CHECK(rows[0]["record_id"] == "qa-001");
  CHECK(rows[0]["final"] == 1.0);
  CHECK(rows[3]["format"] == 0.0);            // no think block
  CHECK(rows[3]["accuracy"] == 1.0);
  CHECK(rows[15]["advantage"] == 0.0);        // identical grounding group
  CHECK(rows[24]["accuracy"] == doctest::Approx(0.6));
  // Same input, same bytes.
  const auto again = dir / "again.jsonl";
  score_rollout_file(testing::fixture("rollouts_5x5.jsonl"), again, kCfg, nullptr, false);
  CHECK(testing::slurp(out) == testing::slurp(again));
}

TEST_CASE("rollout file scoring through a judge callback") {
  testing::TempDir dir;
  testing::spit(dir / "in.jsonl",
                R"({"record_id":"c","task":"chart_to_code","gt_script":"ref","rollouts":["<think>a</think><answer>```python\nref\n```</answer>","<think>a</think><answer>```python\nother\n```</answer>"]})"
                "\n");
  const JudgeFn judge = [](const std::string& cand, const std::string& ref) {
    const auto body = cand.substr(0, cand.find_last_not_of('\n') + 1);
    return body == ref ? verdict({5, 5, 5, 5, 5}) : verdict({1, 1, 1, 1, 1});
  };
  const auto s = score_rollout_file(dir / "in.jsonl", dir / "out.jsonl", kCfg, judge, false);
  CHECK(s.lines_written == 2);
  const auto text = testing::slurp(dir / "out.jsonl");
  CHECK(text.find("\"accuracy\":1.0") != std::string::npos);
  CHECK(text.find("\"accuracy\":0.2") != std::string::npos);
}

TEST_CASE("rollout file errors carry line numbers") {
  testing::TempDir dir;
  testing::spit(dir / "in.jsonl", R"({"record_id":"a","task":"qa","gt_text":"1","rollouts":["x","y"]})"
                                  "\n"
                                  R"({"record_id":"b","task":"qa","rollouts":["x","y"]})"
                                  "\n");
  try {
    score_rollout_file(dir / "in.jsonl", dir / "out.jsonl", kCfg, nullptr, false);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSchemaViolation);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}
