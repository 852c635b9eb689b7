// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>
#include <map>
#include <mutex>
#include <random>
#include <set>

#include <json.hpp>

#include "chartground/error.hpp"
#include "chartground/hashing.hpp"
#include "chartground/pipeline.hpp"
#include "chartground/prompts.hpp"
#include "support.hpp"

using namespace chartground;
namespace fs = std::filesystem;

namespace {

// Stub client whose responses can be overridden per template id. Counts
// calls per template.
struct Scripted {
  std::map<std::string, std::function<std::optional<std::string>(const ModelRequest&)>> rules;
  std::map<std::string, int> calls;
  std::mutex mu;

  CachingModelClient client() {
    ClientConfig cfg;
    cfg.mode = ClientMode::kStub;
    cfg.stub = [this](const ModelRequest& r) -> std::optional<std::string> {
      std::function<std::optional<std::string>(const ModelRequest&)> rule;
      {
        std::lock_guard lock(mu);
        ++calls[r.template_id];
        auto it = rules.find(r.template_id);
        if (it != rules.end()) rule = it->second;
      }
      if (rule) return rule(r);
      return std::nullopt;
    };
    return CachingModelClient(cfg);
  }
  int count(std::string_view id) {
    std::lock_guard lock(mu);
    auto it = calls.find(std::string(id));
    return it == calls.end() ? 0 : it->second;
  }
};

PipelineConfig base_config(const testing::TempDir& dir) {
  PipelineConfig cfg;
  cfg.input_dir = dir / "in";
  cfg.output_dir = dir / "out";
  cfg.root_seed = 7;
  cfg.difficulty_attempts = 2;
  cfg.seed_examples_dir = fs::path(CHARTGROUND_ASSET_DIR) / "seed_evolved";
  return cfg;
}

void make_inputs(const testing::TempDir& dir, int n) {
  fs::create_directories(dir / "in");
  for (int i = 0; i < n; ++i) write_blank_png(dir / "in" / ("img" + std::to_string(i) + ".png"), 32, 24);
}

std::string fenced(const std::string& body) { return "```python\n" + body + "\n```"; }

const std::string kGoodScript =
    "import matplotlib.pyplot as plt\nfig, ax = plt.subplots()\nax.set_title('T')\n"
    "ax.set_xlabel('X')\nax.set_ylabel('Y')\nsave_locations(fig, 'locations.json')";

}  // namespace

TEST_CASE("stage names round trip and stages only move forward") {
  for (int s = 0; s <= static_cast<int>(Stage::kCurated); ++s) {
    const auto stage = static_cast<Stage>(s);
    CHECK(stage_from_name(stage_name(stage)) == stage);
  }
  PipelineManifest m;
  m.images["a"].image_id = "a";
  CHECK(m.advance("a", Stage::kCoded));
  CHECK_FALSE(m.advance("a", Stage::kChartFiltered));
  CHECK_FALSE(m.advance("a", Stage::kCoded));
  CHECK(m.images["a"].stage == Stage::kCoded);
  CHECK(m.advance("a", Stage::kLocated));
  CHECK_THROWS_AS(m.advance("zzz", Stage::kCoded), Error);
  CHECK(m.reached(Stage::kRendered) == 1);
  CHECK(m.reached(Stage::kCurated) == 0);
}

TEST_CASE("manifest json round trip") {
  PipelineManifest m;
  m.root_seed = 42;
  m.template_set_version = "v1";
  m.prompt_set_version = "p1";
  m.prompt_hashes["x"] = "abc";
  m.images["a"].image_id = "a";
  m.images["a"].source = "a.png";
  m.advance("a", Stage::kEvolved);
  m.bump("a", "located_boxes", 12);
  m.images["b"].image_id = "b";
  m.mark("b", ImageStatus::kDropped, "non-chart");
  m.run_counters["records_sft"] = 3;
  const auto back = PipelineManifest::from_json(m.to_json());
  CHECK(back.to_json() == m.to_json());
  CHECK(back.counters().at("located_boxes") == 12);
  CHECK(back.counters().at("images_dropped") == 1);
  CHECK_THROWS_AS(PipelineManifest::from_json("{"), Error);
}

TEST_CASE("chart filter partitions inputs") {
  testing::TempDir dir;
  make_inputs(dir, 2);
  testing::spit(dir / "in/photo.png", "not really");
  Scripted s;
  s.rules[std::string(prompts::kChartFilter)] = [](const ModelRequest& r) -> std::optional<std::string> {
    for (const auto& m : r.messages) {
      if (m.image && m.image->stem() == "photo") return "Non-chart";
    }
    return "Chart.";
  };
  auto client = s.client();
  StubBridge bridge;
  Pipeline p(client, bridge, base_config(dir));
  auto part = p.filter_charts({dir / "in/img0.png", dir / "in/photo.png", dir / "in/missing.png", dir / "in/img1.png"});
  CHECK(part.kept == std::vector<std::string>{"img0", "img1"});
  CHECK(part.dropped == std::vector<std::string>{"photo"});
  CHECK(part.failed == std::vector<std::string>{"missing"});
  CHECK(p.manifest().images.at("photo").status == ImageStatus::kDropped);
  CHECK(p.manifest().images.at("missing").status == ImageStatus::kFailed);

  s.rules[std::string(prompts::kChartFilter)] = [](const ModelRequest&) -> std::optional<std::string> {
    return "maybe";
  };
  CHECK_THROWS_AS(p.is_chart(dir / "in/img0.png"), Error);
}

TEST_CASE("chart to code keeps the longest block") {
  testing::TempDir dir;
  make_inputs(dir, 1);
  Scripted s;
  auto client = s.client();
  StubBridge bridge;
  Pipeline p(client, bridge, base_config(dir));
  s.rules[std::string(prompts::kChartToCode)] = [](const ModelRequest&) -> std::optional<std::string> {
    return "first\n```python\nx = 1\n```\nthen\n```python\nimport matplotlib\nx = 2\n```";
  };
  CHECK(p.chart_to_code(dir / "in/img0.png") == "import matplotlib\nx = 2\n");
  s.rules[std::string(prompts::kChartToCode)] = [](const ModelRequest&) -> std::optional<std::string> {
    return "I cannot do that.";
  };
  try {
    p.chart_to_code(dir / "in/img0.png");
    FAIL("expected NoCodeBlock");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoCodeBlock);
  }
}

TEST_CASE("distortion filter") {
  testing::TempDir dir;
  make_inputs(dir, 1);
  Scripted s;
  auto client = s.client();
  StubBridge bridge;
  Pipeline p(client, bridge, base_config(dir));
  const auto good = bridge.render(kGoodScript, dir / "r", false, std::chrono::seconds(5));
  CHECK(p.filter_distorted(dir / "in/img0.png", good));
  s.rules[std::string(prompts::kDistortionFilter)] = [](const ModelRequest&) -> std::optional<std::string> {
    return "Distorted";
  };
  CHECK_FALSE(p.filter_distorted(dir / "in/img0.png", good));

  const int before = s.count(prompts::kDistortionFilter);
  RenderResult failed;
  failed.status = RenderResult::Status::kError;
  CHECK_FALSE(p.filter_distorted(dir / "in/img0.png", failed));
  CHECK(s.count(prompts::kDistortionFilter) == before);
}

TEST_CASE("evolution retries with the render error") {
  testing::TempDir dir;
  Scripted s;
  std::atomic<int> attempt{0};
  std::string repair_prompt;
  s.rules[std::string(prompts::kEvolve)] = [&](const ModelRequest&) -> std::optional<std::string> {
    ++attempt;
    return fenced("raise RuntimeError('first')");
  };
  s.rules[std::string(prompts::kEvolveRepair)] = [&](const ModelRequest& r) -> std::optional<std::string> {
    const int n = ++attempt;
    for (const auto& m : r.messages) repair_prompt += m.text;
    return n < 3 ? fenced("raise RuntimeError('again')") : fenced(kGoodScript);
  };
  auto client = s.client();
  StubBridge bridge;
  Pipeline p(client, bridge, base_config(dir));
  const auto seeds = p.load_seed_examples();
  REQUIRE(seeds.size() == 3);
  const auto outcome = p.evolve_code("import matplotlib", seeds, dir / "evo");
  CHECK(outcome.retries == 2);
  CHECK(outcome.render.status == RenderResult::Status::kOk);
  CHECK(outcome.locations.subplots.size() == 1);
  CHECK(repair_prompt.find("RuntimeError") != std::string::npos);

  attempt = 0;
  s.rules[std::string(prompts::kEvolveRepair)] = [&](const ModelRequest&) -> std::optional<std::string> {
    ++attempt;
    return fenced("raise RuntimeError('never')");
  };
  try {
    p.evolve_code("import matplotlib", seeds, dir / "evo2");
    FAIL("expected EvolutionFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEvolutionFailed);
  }
  CHECK(attempt == 3);
  CHECK_THROWS_AS(p.evolve_code("x", {}, dir / "evo3"), Error);
}

TEST_CASE("qa verification tallies and batch rejection") {
  testing::TempDir dir;
  make_inputs(dir, 1);
  Scripted s;
  auto client = s.client();
  StubBridge bridge;
  Pipeline p(client, bridge, base_config(dir));
  const fs::path image = dir / "in/img0.png";

  auto all = p.generate_and_verify_qa(image, kGoodScript);
  CHECK_FALSE(all.batch_rejected);
  CHECK(all.candidates == 10);
  CHECK(all.accepted.size() == 10);

  s.rules[std::string(prompts::kVerify)] = [](const ModelRequest&) -> std::optional<std::string> {
    nlohmann::json v = nlohmann::json::array();
    for (int i = 0; i < 10; ++i) {
      v.push_back({{"groundable", i != 3}, {"answerable", i != 5}, {"correct", i != 7}});
    }
    return "Here you go:\n```json\n" + v.dump() + "\n```";
  };
  auto some = p.generate_and_verify_qa(image, kGoodScript);
  CHECK(some.hallucinated == 1);
  CHECK(some.unanswerable == 1);
  CHECK(some.incorrect == 1);
  CHECK(some.accepted.size() == 7);

  s.rules[std::string(prompts::kVerify)] = [](const ModelRequest&) -> std::optional<std::string> {
    nlohmann::json v = nlohmann::json::array();
    for (int i = 0; i < 9; ++i) v.push_back({{"groundable", true}, {"answerable", true}, {"correct", true}});
    return v.dump();
  };
  auto short_batch = p.generate_and_verify_qa(image, kGoodScript);
  CHECK(short_batch.batch_rejected);
  CHECK(short_batch.accepted.empty());
  CHECK(short_batch.batch_reason.find("9 verdicts for 10") != std::string::npos);

  s.rules[std::string(prompts::kVerify)] = [](const ModelRequest&) -> std::optional<std::string> {
    return R"([{"groundable":"yes","answerable":true,"correct":true}])";
  };
  s.rules[std::string(prompts::kQaGenerate)] = [](const ModelRequest&) -> std::optional<std::string> {
    return R"([{"question":"Q?","answer":"A","scope":"local"}])";
  };
  CHECK(p.generate_and_verify_qa(image, kGoodScript).batch_rejected);

  s.rules[std::string(prompts::kQaGenerate)] = [](const ModelRequest&) -> std::optional<std::string> {
    return "no questions today";
  };
  auto none = p.generate_and_verify_qa(image, kGoodScript);
  CHECK(none.batch_rejected);
  CHECK(none.candidates == 0);
}

TEST_CASE("difficulty estimate counts correct probes") {
  testing::TempDir dir;
  make_inputs(dir, 1);
  Scripted s;
  auto client = s.client();
  StubBridge bridge;
  Pipeline p(client, bridge, base_config(dir));
  const fs::path image = dir / "in/img0.png";
  const auto qa = qa_record("Which is highest?", "B", ReasoningScope::kGlobal, "img0.png");

  s.rules[std::string(prompts::kDifficultyProbe)] = [](const ModelRequest&) -> std::optional<std::string> {
    return "<think>look</think><answer>B</answer>";
  };
  CHECK(p.estimate_difficulty(qa, image, 8) == 1.0);
  s.rules[std::string(prompts::kDifficultyProbe)] = [](const ModelRequest& r) -> std::optional<std::string> {
    return r.sample_index % 2 == 0 ? "<think>x</think><answer>B</answer>" : "<think>x</think><answer>C</answer>";
  };
  CHECK(p.estimate_difficulty(qa, image, 8) == 0.5);
  CHECK_THROWS_AS(p.estimate_difficulty(qa, image, 0), Error);

  DatasetRecord g;
  g.task = TaskKind::kGrounding;
  g.image_ref = "img0.png";
  g.question = "Where is the title?";
  g.answer_boxes = std::vector<BBox>{BBox(10, 10, 20, 20)};
  g.record_id = compute_record_id(g);
  s.rules[std::string(prompts::kDifficultyProbe)] = [](const ModelRequest& r) -> std::optional<std::string> {
    // IoU 1.0, then IoU 0.25 (below the 0.5 success threshold)
    return r.sample_index == 0 ? "<think>x</think><answer>[10, 10, 20, 20]</answer>"
                               : "<think>x</think><answer>[10, 10, 20, 40]</answer>";
  };
  CHECK(p.estimate_difficulty(g, image, 2) == 0.5);
}

TEST_CASE("curation weights and subset property") {
  std::vector<ScoredRecord> records;
  for (int i = 0; i < 4; ++i) {
    ScoredRecord r;
    r.record = qa_record("Q" + std::to_string(i) + "?", "A", ReasoningScope::kLocal, "x.png");
    r.pass_probability = i == 0 ? 0.0 : 1.0;  // weights 1, 0.01, 0.01, 0.01
    records.push_back(r);
  }
  int first = 0;
  constexpr int kTrials = 20000;
  for (int t = 0; t < kTrials; ++t) {
    const auto splits = curate_splits(records, 1, static_cast<std::uint64_t>(t));
    REQUIRE(splits.rl.size() == 1);
    first += splits.rl[0].question == "Q0?" ? 1 : 0;
  }
  // P(first) = 1 / 1.03
  CHECK(static_cast<double>(first) / kTrials == doctest::Approx(1.0 / 1.03).epsilon(0.01));

  const auto splits = curate_splits(records, 3, 5, WeightMode::kP);
  CHECK(splits.sft.size() == 4);
  std::set<std::string> sft_ids;
  for (const auto& r : splits.sft) {
    CHECK(r.split == Split::kSft);
    sft_ids.insert(r.record_id);
  }
  std::set<std::string> rl_ids;
  for (const auto& r : splits.rl) {
    CHECK(r.split == Split::kRl);
    CHECK(sft_ids.contains(r.record_id));
    rl_ids.insert(r.record_id);
  }
  CHECK(rl_ids.size() == 3);
  CHECK_THROWS_AS(curate_splits(records, 5, 1), Error);
  records[0].pass_probability = 1.5;
  CHECK_THROWS_AS(curate_splits(records, 1, 1), Error);
}

TEST_CASE("full run in stub mode") {
  testing::TempDir dir;
  make_inputs(dir, 3);
  Scripted s;
  s.rules[std::string(prompts::kChartFilter)] = [](const ModelRequest& r) -> std::optional<std::string> {
    for (const auto& m : r.messages) {
      if (m.image && m.image->stem() == "img2") return "non-chart";
    }
    return std::nullopt;
  };
  auto client = s.client();
  StubBridge bridge;
  auto cfg = base_config(dir);
  cfg.workers = 2;
  BuildSummary summary;
  std::string sft_first;
  {
    Pipeline p(client, bridge, cfg);
    summary = p.run();
    CHECK(p.manifest().images.at("img2").status == ImageStatus::kDropped);
    CHECK(p.manifest().images.at("img0").stage == Stage::kCurated);
    CHECK(p.manifest().images.at("img1").stage == Stage::kCurated);
  }
  CHECK(summary.images == 3);
  CHECK(summary.records_per_task.at("chart_to_code") == 2);
  CHECK(summary.records_per_task.at("qa") == 20);
  CHECK(summary.records_per_task.at("grounding") > 0);
  CHECK(summary.rl_records == (summary.sft_records + 1) / 2);

  const auto sft = read_jsonl(dir / "out/splits/sft.jsonl");
  const auto rl = read_jsonl(dir / "out/splits/rl.jsonl");
  std::set<std::string> ids;
  for (const auto& r : sft) {
    ids.insert(r.record_id);
    if (r.task == TaskKind::kQa) CHECK(r.reasoning_scope.has_value());
    CHECK(r.provenance.contains("difficulty"));
    CHECK(fs::exists(r.provenance.at("image_base") == "input" ? dir / "in" / r.image_ref
                                                                : dir / "out" / r.image_ref));
  }
  CHECK(ids.size() == sft.size());
  for (const auto& r : rl) CHECK(ids.contains(r.record_id));
  CHECK(fs::exists(dir / "out/locations/img0.json"));
  CHECK(fs::exists(dir / "out/evolved/img1.py"));
  CHECK_FALSE(fs::exists(dir / "out/work"));

  // Resume: nothing is regenerated and the output is unchanged.
  sft_first = testing::slurp(dir / "out/splits/sft.jsonl");
  const int generations = s.count(prompts::kQaGenerate);
  {
    Pipeline p(client, bridge, cfg);
    p.run();
  }
  CHECK(s.count(prompts::kQaGenerate) == generations);
  CHECK(testing::slurp(dir / "out/splits/sft.jsonl") == sft_first);

  // A different seed refuses to reuse the directory.
  cfg.root_seed = 8;
  Pipeline other(client, bridge, cfg);
  CHECK_THROWS_AS(other.run(), Error);
}

TEST_CASE("fresh runs are byte identical") {
  std::string a, b;
  for (std::string* target : {&a, &b}) {
    testing::TempDir dir;
    make_inputs(dir, 2);
    Scripted s;
    auto client = s.client();
    StubBridge bridge;
    auto cfg = base_config(dir);
    cfg.workers = 3;
    Pipeline p(client, bridge, cfg);
    p.run();
    *target = testing::slurp(dir / "out/splits/sft.jsonl") + testing::slurp(dir / "out/splits/rl.jsonl");
  }
  CHECK_FALSE(a.empty());
  CHECK(a == b);
}

TEST_CASE("cancel flushes the manifest and throws") {
  testing::TempDir dir;
  make_inputs(dir, 2);
  Scripted s;
  auto client = s.client();
  StubBridge bridge;
  Pipeline p(client, bridge, base_config(dir));
  s.rules[std::string(prompts::kChartFilter)] = [&](const ModelRequest&) -> std::optional<std::string> {
    p.cancel();
    return std::nullopt;
  };
  try {
    p.run();
    FAIL("expected Cancelled");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCancelled);
  }
  CHECK(fs::exists(dir / "out/manifest.json"));
}
