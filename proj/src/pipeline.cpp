// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartground/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>
#include <thread>

#include "chartground/error.hpp"
#include "chartground/hashing.hpp"
#include "chartground/prompts.hpp"
#include "chartground/sampling.hpp"
#include "text_util.hpp"

namespace chartground {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr Stage kAllStages[] = {Stage::kIngested,          Stage::kChartFiltered, Stage::kCoded,
                                Stage::kRendered,          Stage::kDistortionFiltered,
                                Stage::kEvolved,           Stage::kLocated,       Stage::kQaGenerated,
                                Stage::kQaVerified,        Stage::kCurated};

const std::set<std::string> kImageExtensions = {".png", ".jpg", ".jpeg", ".gif", ".webp", ".bmp"};

std::string longest_block(std::string_view text) {
  const auto blocks = detail::fenced_blocks(text);
  const detail::FencedBlock* best = nullptr;
  for (const auto& b : blocks) {
    if (!best || b.body.size() > best->body.size()) best = &b;
  }
  if (!best || detail::trim(best->body).empty()) {
    throw Error(ErrorCode::kNoCodeBlock, "response has no fenced code block");
  }
  return best->body;
}

std::string format_p(double p) { return detail::format_double(p); }

}  // namespace

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kIngested: return "ingested";
    case Stage::kChartFiltered: return "chart_filtered";
    case Stage::kCoded: return "coded";
    case Stage::kRendered: return "rendered";
    case Stage::kDistortionFiltered: return "distortion_filtered";
    case Stage::kEvolved: return "evolved";
    case Stage::kLocated: return "located";
    case Stage::kQaGenerated: return "qa_generated";
    case Stage::kQaVerified: return "qa_verified";
    case Stage::kCurated: return "curated";
  }
  return "ingested";
}

std::optional<Stage> stage_from_name(std::string_view name) {
  for (auto s : kAllStages) {
    if (stage_name(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view image_status_name(ImageStatus status) {
  switch (status) {
    case ImageStatus::kActive: return "active";
    case ImageStatus::kDropped: return "dropped";
    case ImageStatus::kFailed: return "failed";
  }
  return "active";
}

std::string_view weight_mode_name(WeightMode mode) {
  return mode == WeightMode::kOneMinusP ? "one_minus_p" : "p";
}

std::optional<WeightMode> weight_mode_from_name(std::string_view name) {
  if (name == "one_minus_p") return WeightMode::kOneMinusP;
  if (name == "p") return WeightMode::kP;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Manifest

bool PipelineManifest::advance(const std::string& image_id, Stage stage) {
  auto it = images.find(image_id);
  if (it == images.end()) throw Error(ErrorCode::kInvalidArgument, "unknown image '" + image_id + "'");
  if (stage <= it->second.stage) return false;
  it->second.stage = stage;
  return true;
}

void PipelineManifest::mark(const std::string& image_id, ImageStatus status, std::string reason) {
  auto it = images.find(image_id);
  if (it == images.end()) throw Error(ErrorCode::kInvalidArgument, "unknown image '" + image_id + "'");
  it->second.status = status;
  it->second.reason = std::move(reason);
}

void PipelineManifest::bump(const std::string& image_id, const std::string& counter, std::size_t by) {
  auto it = images.find(image_id);
  if (it == images.end()) throw Error(ErrorCode::kInvalidArgument, "unknown image '" + image_id + "'");
  it->second.counters[counter] += by;
}

std::size_t PipelineManifest::reached(Stage stage) const {
  return static_cast<std::size_t>(std::count_if(
      images.begin(), images.end(), [&](const auto& kv) { return kv.second.stage >= stage; }));
}

std::map<std::string, std::size_t> PipelineManifest::counters() const {
  auto out = run_counters;
  for (const auto& [_, entry] : images) {
    for (const auto& [k, v] : entry.counters) out[k] += v;
    if (entry.status == ImageStatus::kDropped) out["images_dropped"] += 1;
    if (entry.status == ImageStatus::kFailed) out["images_failed"] += 1;
  }
  out["images_ingested"] = images.size();
  return out;
}

std::string PipelineManifest::to_json() const {
  ordered_json doc;
  doc["root_seed"] = root_seed;
  doc["template_set_version"] = template_set_version;
  doc["prompt_set_version"] = prompt_set_version;
  doc["prompt_hashes"] = ordered_json::object();
  for (const auto& [k, v] : prompt_hashes) doc["prompt_hashes"][k] = v;
  doc["stage_counts"] = ordered_json::object();
  for (auto s : kAllStages) doc["stage_counts"][std::string(stage_name(s))] = reached(s);
  doc["counters"] = ordered_json::object();
  for (const auto& [k, v] : counters()) doc["counters"][k] = v;
  doc["run_counters"] = ordered_json::object();
  for (const auto& [k, v] : run_counters) doc["run_counters"][k] = v;
  doc["images"] = ordered_json::object();
  for (const auto& [id, e] : images) {
    ordered_json node;
    node["source"] = e.source;
    node["stage"] = stage_name(e.stage);
    node["status"] = image_status_name(e.status);
    node["reason"] = e.reason;
    node["evolution_retries"] = e.evolution_retries;
    node["subplot_count"] = e.subplot_count;
    node["counters"] = ordered_json::object();
    for (const auto& [k, v] : e.counters) node["counters"][k] = v;
    doc["images"][id] = std::move(node);
  }
  return doc.dump(2) + "\n";
}

PipelineManifest PipelineManifest::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedJson, e.what());
  }
  try {
    PipelineManifest m;
    m.root_seed = doc.at("root_seed").get<std::uint64_t>();
    m.template_set_version = doc.at("template_set_version").get<std::string>();
    m.prompt_set_version = doc.at("prompt_set_version").get<std::string>();
    m.prompt_hashes = doc.at("prompt_hashes").get<std::map<std::string, std::string>>();
    if (doc.contains("run_counters")) {
      m.run_counters = doc.at("run_counters").get<std::map<std::string, std::size_t>>();
    }
    for (const auto& [id, node] : doc.at("images").items()) {
      ImageLedgerEntry e;
      e.image_id = id;
      e.source = node.at("source").get<std::string>();
      const auto stage = stage_from_name(node.at("stage").get<std::string>());
      if (!stage) throw Error(ErrorCode::kSchemaViolation, "images." + id + ".stage: unknown stage");
      e.stage = *stage;
      const auto status = node.at("status").get<std::string>();
      e.status = status == "dropped"  ? ImageStatus::kDropped
                 : status == "failed" ? ImageStatus::kFailed
                                      : ImageStatus::kActive;
      e.reason = node.at("reason").get<std::string>();
      e.evolution_retries = node.at("evolution_retries").get<int>();
      e.subplot_count = node.at("subplot_count").get<std::size_t>();
      e.counters = node.at("counters").get<std::map<std::string, std::size_t>>();
      m.images[id] = std::move(e);
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, std::string("manifest: ") + e.what());
  }
}

void PipelineManifest::save(const fs::path& path) const { detail::write_file_atomic(path, to_json()); }

// ---------------------------------------------------------------------------
// Curation

Splits curate_splits(const std::vector<ScoredRecord>& records, std::size_t rl_size,
                     std::uint64_t seed, WeightMode mode) {
  if (rl_size > records.size()) {
    throw Error(ErrorCode::kInsufficientRecords, "RL split of " + std::to_string(rl_size) +
                                                     " requested from " +
                                                     std::to_string(records.size()) + " records");
  }
  Splits out;
  std::vector<double> weights;
  for (const auto& r : records) {
    if (!(r.pass_probability >= 0.0 && r.pass_probability <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "pass probability outside [0, 1]");
    }
    auto rec = r.record;
    rec.split = Split::kSft;
    out.sft.push_back(std::move(rec));
    const double w = mode == WeightMode::kOneMinusP ? 1.0 - r.pass_probability : r.pass_probability;
    weights.push_back(std::max(kMinSamplingWeight, w));
  }
  for (std::size_t index : weighted_sample_without_replacement(weights, rl_size, seed)) {
    auto rec = records[index].record;
    rec.split = Split::kRl;
    out.rl.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline stages

Pipeline::Pipeline(ModelClient& client, RenderBridge& bridge, PipelineConfig config)
    : client_(client), bridge_(bridge), config_(std::move(config)) {
  config_.reward.validate();
  if (config_.workers == 0) config_.workers = 1;
  if (!config_.seed_examples_dir.empty()) seed_examples_ = load_seed_examples();
  manifest_.root_seed = config_.root_seed;
  manifest_.template_set_version = config_.template_set_version;
  manifest_.prompt_set_version = std::string(prompts::kPromptSetVersion);
  manifest_.prompt_hashes = prompts::prompt_hashes();
}

std::vector<std::string> Pipeline::load_seed_examples() const {
  std::vector<fs::path> files;
  if (fs::is_directory(config_.seed_examples_dir)) {
    for (const auto& entry : fs::directory_iterator(config_.seed_examples_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".py") files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<std::string> out;
  for (const auto& f : files) out.push_back(detail::read_file(f));
  return out;
}

bool Pipeline::is_chart(const fs::path& image) {
  const auto text = detail::to_lower(detail::trim(client_.complete(prompts::chart_filter(image)).text));
  if (text.find("non-chart") != std::string::npos || text.find("non chart") != std::string::npos ||
      text.find("not a chart") != std::string::npos) {
    return false;
  }
  if (text.find("chart") != std::string::npos) return true;
  throw Error(ErrorCode::kProviderError, "unrecognized chart filter verdict '" + text + "'");
}

FilterPartition Pipeline::filter_charts(const std::vector<fs::path>& images) {
  FilterPartition out;
  for (const auto& image : images) {
    const std::string id = image.stem().string();
    commit([&](PipelineManifest& m) {
      auto& e = m.images[id];
      e.image_id = id;
      e.source = image.filename().string();
    });
    try {
      detail::read_file(image);
      const bool keep = is_chart(image);
      commit([&](PipelineManifest& m) {
        m.advance(id, Stage::kChartFiltered);
        if (!keep) m.mark(id, ImageStatus::kDropped, "non-chart");
      });
      (keep ? out.kept : out.dropped).push_back(id);
    } catch (const Error& e) {
      commit([&](PipelineManifest& m) { m.mark(id, ImageStatus::kFailed, e.what()); });
      out.failed.push_back(id);
    }
  }
  return out;
}

std::string Pipeline::chart_to_code(const fs::path& image) {
  return longest_block(client_.complete(prompts::chart_to_code(image)).text);
}

bool Pipeline::filter_distorted(const fs::path& original, const RenderResult& reproduced) {
  if (reproduced.status != RenderResult::Status::kOk) return false;
  const auto text = detail::to_lower(detail::trim(
      client_.complete(prompts::distortion_filter(original, reproduced.image)).text));
  if (text.find("distorted") != std::string::npos) return false;
  if (text.find("faithful") != std::string::npos) return true;
  throw Error(ErrorCode::kProviderError, "unrecognized distortion verdict '" + text + "'");
}

EvolutionOutcome Pipeline::evolve_code(std::string_view script, const std::vector<std::string>& seed_examples,
                                       const fs::path& workdir) {
  if (seed_examples.empty()) throw Error(ErrorCode::kInvalidArgument, "evolution needs seed examples");
  std::string last_script;
  std::string last_error;
  for (int attempt = 0; attempt <= config_.evolve_retries; ++attempt) {
    const auto request = attempt == 0 ? prompts::evolve(script, seed_examples)
                                      : prompts::evolve_repair(script, seed_examples, last_script, last_error);
    const auto response = client_.complete(request);
    std::string candidate;
    try {
      candidate = longest_block(response.text);
    } catch (const Error& e) {
      last_script = response.text;
      last_error = e.what();
      continue;
    }
    const fs::path dir = workdir / ("attempt" + std::to_string(attempt));
    fs::remove_all(dir);
    auto render = bridge_.render(candidate, dir, /*emit_locations=*/true, config_.render_timeout);
    if (render.status == RenderResult::Status::kOk && render.locations) {
      try {
        auto map = parse_location_file(detail::read_file(*render.locations));
        return EvolutionOutcome{std::move(candidate), attempt, std::move(render), std::move(map)};
      } catch (const Error& e) {
        last_error = e.what();
      }
    } else {
      last_error = std::string(render_status_name(render.status)) + ": " + render.stderr_excerpt;
    }
    last_script = std::move(candidate);
  }
  throw Error(ErrorCode::kEvolutionFailed,
              "no valid evolved script after " + std::to_string(config_.evolve_retries + 1) +
                  " attempts; last error: " + last_error);
}

QaOutcome Pipeline::generate_and_verify_qa(const fs::path& image, std::string_view script) {
  QaOutcome out;
  const auto generated = client_.complete(prompts::qa_generate(image, script));
  QaParseResult parsed;
  try {
    parsed = parse_qa_generation(generated.text);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoParseableContent) throw;
    out.batch_rejected = true;
    out.batch_reason = e.what();
    return out;
  }
  out.candidates = parsed.pairs.size();
  out.dropped_by_parser = parsed.dropped_invalid + parsed.dropped_truncated;

  ordered_json candidates = ordered_json::array();
  for (std::size_t i = 0; i < parsed.pairs.size(); ++i) {
    const auto& p = parsed.pairs[i];
    candidates.push_back({{"index", i}, {"question", p.question}, {"answer", p.answer},
                          {"scope", scope_name(p.scope)}});
  }
  const auto verdict_text = client_.complete(prompts::verify(image, script, candidates.dump(1))).text;

  std::optional<json> verdicts;
  std::vector<std::string> sources;
  for (auto& b : detail::fenced_blocks(verdict_text)) sources.push_back(std::move(b.body));
  sources.push_back(verdict_text);
  for (const auto& src : sources) {
    for (auto span : detail::balanced_spans(src, '[')) {
      auto v = json::parse(span, nullptr, false);
      if (!v.is_discarded() && v.is_array()) {
        verdicts = std::move(v);
        break;
      }
    }
    if (verdicts) break;
  }
  if (!verdicts) {
    out.batch_rejected = true;
    out.batch_reason = "verdict output is not a JSON array";
    return out;
  }
  if (verdicts->size() != parsed.pairs.size()) {
    out.batch_rejected = true;
    out.batch_reason = Error(ErrorCode::kVerdictMisaligned,
                             std::to_string(verdicts->size()) + " verdicts for " +
                                 std::to_string(parsed.pairs.size()) + " candidates")
                           .what();
    return out;
  }
  for (const auto& v : *verdicts) {
    for (const char* key : {"groundable", "answerable", "correct"}) {
      if (!v.is_object() || !v.contains(key) || !v.at(key).is_boolean()) {
        out.batch_rejected = true;
        out.batch_reason = std::string("verdict lacks boolean '") + key + "'";
        return out;
      }
    }
  }
  for (std::size_t i = 0; i < parsed.pairs.size(); ++i) {
    const auto& v = (*verdicts)[i];
    const bool groundable = v.at("groundable").get<bool>();
    const bool answerable = v.at("answerable").get<bool>();
    const bool correct = v.at("correct").get<bool>();
    out.hallucinated += groundable ? 0 : 1;
    out.unanswerable += answerable ? 0 : 1;
    out.incorrect += correct ? 0 : 1;
    if (groundable && answerable && correct) out.accepted.push_back(parsed.pairs[i]);
  }
  return out;
}

double Pipeline::estimate_difficulty(const DatasetRecord& record, const fs::path& image, int attempts) {
  if (attempts < 1) throw Error(ErrorCode::kInvalidArgument, "difficulty needs at least one attempt");
  validate_record(record);
  int correct = 0;
  for (int i = 0; i < attempts; ++i) {
    try {
      const auto response =
          client_.complete(prompts::difficulty_probe(image, record.question, task_name(record.task), i));
      const RolloutResponse rollout{record.task, response.text};
      bool ok = false;
      switch (record.task) {
        case TaskKind::kQa:
          ok = accuracy_reward(rollout, GroundTruth{*record.answer_text}) == 1.0;
          break;
        case TaskKind::kGrounding:
          ok = accuracy_reward(rollout, GroundTruth{record.answer_boxes->front()}) >=
               config_.probe_success_threshold;
          break;
        case TaskKind::kChartToCode: {
          std::string candidate;
          try {
            candidate = std::get<std::string>(extract_answer(rollout));
          } catch (const Error&) {
            break;
          }
          const auto verdict = client_.complete(prompts::judge(candidate, *record.answer_script)).text;
          ok = code_reward(verdict, config_.reward) >= config_.probe_success_threshold;
          break;
        }
      }
      correct += ok ? 1 : 0;
    } catch (const Error&) {
      ++probe_failures_;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(attempts);
}

// ---------------------------------------------------------------------------
// Full run

void Pipeline::commit(const std::function<void(PipelineManifest&)>& update) {
  std::lock_guard lock(manifest_mutex_);
  update(manifest_);
  if (!config_.output_dir.empty()) manifest_.save(config_.output_dir / "manifest.json");
}

fs::path Pipeline::resolve_image(const DatasetRecord& record) const {
  auto it = record.provenance.find("image_base");
  const bool input = it != record.provenance.end() && it->second == "input";
  return (input ? config_.input_dir : config_.output_dir) / record.image_ref;
}

bool Pipeline::restore_image(ImageWork& work) {
  ImageLedgerEntry entry;
  {
    std::lock_guard lock(manifest_mutex_);
    auto it = manifest_.images.find(work.id);
    if (it == manifest_.images.end()) return false;
    entry = it->second;
  }
  const bool finished = entry.status != ImageStatus::kActive || entry.stage >= Stage::kQaVerified;
  const fs::path records = config_.output_dir / "records" / (work.id + ".jsonl");
  if (!finished || !fs::exists(records)) return false;
  work.records = read_jsonl(records);
  return true;
}

void Pipeline::process_image(ImageWork& work) {
  const fs::path out = config_.output_dir;
  const std::string& id = work.id;
  const fs::path workdir = out / "work" / id;
  fs::remove_all(workdir);
  commit([&](PipelineManifest& m) {
    ImageLedgerEntry e;
    e.image_id = id;
    e.source = work.source.filename().string();
    m.images[id] = std::move(e);
  });

  auto provenance = [&](DatasetRecord& r, bool from_input, std::size_t subplots) {
    r.provenance["source_image"] = work.source.filename().string();
    r.provenance["image_base"] = from_input ? "input" : "output";
    r.provenance["prompt_set_version"] = std::string(prompts::kPromptSetVersion);
    r.provenance["template_set_version"] = config_.template_set_version;
    if (subplots > 0) r.provenance["subplot_count"] = std::to_string(subplots);
  };

  try {
    try {
      detail::read_file(work.source);
    } catch (const Error& e) {
      throw Error(ErrorCode::kIo, "unreadable image: " + e.detail());
    }
    const bool chart = is_chart(work.source);
    commit([&](PipelineManifest& m) { m.advance(id, Stage::kChartFiltered); });
    if (!chart) {
      commit([&](PipelineManifest& m) { m.mark(id, ImageStatus::kDropped, "non-chart"); });
      return;
    }

    const std::string script = chart_to_code(work.source);
    detail::write_file_atomic(out / "scripts" / (id + ".py"), script);
    commit([&](PipelineManifest& m) { m.advance(id, Stage::kCoded); });

    const auto reproduced = bridge_.render(script, workdir / "reproduce", false, config_.render_timeout);
    if (reproduced.status == RenderResult::Status::kOk) {
      fs::create_directories(out / "images");
      fs::copy_file(reproduced.image, out / "images" / (id + ".reproduced.png"),
                    fs::copy_options::overwrite_existing);
    }
    commit([&](PipelineManifest& m) { m.advance(id, Stage::kRendered); });

    const bool faithful = filter_distorted(work.source, reproduced);
    commit([&](PipelineManifest& m) { m.advance(id, Stage::kDistortionFiltered); });
    if (!faithful) {
      const std::string why = reproduced.status == RenderResult::Status::kOk
                                  ? "distorted reproduction"
                                  : "render failed: " + std::string(render_status_name(reproduced.status));
      commit([&](PipelineManifest& m) { m.mark(id, ImageStatus::kDropped, why); });
      return;
    }

    auto c2c = chart_to_code_record(script, work.source.filename().string());
    provenance(c2c, true, 0);
    work.records.push_back(std::move(c2c));

    auto evolved = evolve_code(script, seed_examples_, workdir / "evolve");
    detail::write_file_atomic(out / "evolved" / (id + ".py"), evolved.script);
    fs::create_directories(out / "images");
    const std::string image_ref = "images/" + id + ".png";
    fs::copy_file(evolved.render.image, out / image_ref, fs::copy_options::overwrite_existing);
    commit([&](PipelineManifest& m) {
      m.advance(id, Stage::kEvolved);
      m.images[id].evolution_retries = evolved.retries;
      m.bump(id, "evolution_retries", static_cast<std::size_t>(evolved.retries));
    });

    evolved.locations.image_id = id;
    detail::write_file_atomic(out / "locations" / (id + ".json"), serialize_location_file(evolved.locations));
    const std::size_t subplots = evolved.locations.subplots.size();
    commit([&](PipelineManifest& m) {
      m.advance(id, Stage::kLocated);
      m.images[id].subplot_count = subplots;
      m.bump(id, "located_boxes", evolved.locations.box_count());
    });
    work.records.front().provenance["subplot_count"] = std::to_string(subplots);

    const auto sampled = sample_elements(evolved.locations, config_.per_category,
                                         derive_seed(config_.root_seed, "sample/" + id));
    std::size_t grounding = 0;
    std::size_t skipped = 0;
    for (const auto& element : sampled) {
      try {
        auto r = grounding_record(element, image_ref, config_.template_set_version);
        provenance(r, false, subplots);
        work.records.push_back(std::move(r));
        ++grounding;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUnknownCategory) throw;
        ++skipped;
      }
    }
    commit([&](PipelineManifest& m) {
      m.bump(id, "grounding_records", grounding);
      if (skipped > 0) m.bump(id, "grounding_skipped_unknown_category", skipped);
    });

    const auto qa = generate_and_verify_qa(out / image_ref, script);
    commit([&](PipelineManifest& m) {
      m.advance(id, Stage::kQaGenerated);
      m.bump(id, "qa_candidates", qa.candidates);
      m.bump(id, "qa_parser_dropped", qa.dropped_by_parser);
    });
    ordered_json qa_doc;
    qa_doc["batch_rejected"] = qa.batch_rejected;
    qa_doc["batch_reason"] = qa.batch_reason;
    qa_doc["candidates"] = qa.candidates;
    qa_doc["hallucinated"] = qa.hallucinated;
    qa_doc["unanswerable"] = qa.unanswerable;
    qa_doc["incorrect"] = qa.incorrect;
    qa_doc["accepted"] = ordered_json::array();
    for (const auto& p : qa.accepted) {
      qa_doc["accepted"].push_back(
          {{"question", p.question}, {"answer", p.answer}, {"scope", scope_name(p.scope)}});
      auto r = qa_record(p.question, p.answer, p.scope, image_ref);
      provenance(r, false, subplots);
      work.records.push_back(std::move(r));
    }
    detail::write_file_atomic(out / "qa" / (id + ".json"), qa_doc.dump(2) + "\n");
    commit([&](PipelineManifest& m) {
      m.advance(id, Stage::kQaVerified);
      m.bump(id, "qa_accepted", qa.accepted.size());
      m.bump(id, "qa_hallucinated", qa.hallucinated);
      m.bump(id, "qa_unanswerable", qa.unanswerable);
      m.bump(id, "qa_incorrect", qa.incorrect);
      if (qa.batch_rejected) {
        m.bump(id, "qa_batches_rejected");
        m.images[id].reason = qa.batch_reason;
      }
    });
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCancelled) throw;
    commit([&](PipelineManifest& m) { m.mark(id, ImageStatus::kFailed, e.what()); });
  }
  fs::remove_all(workdir);
}

BuildSummary Pipeline::run() {
  const fs::path out = config_.output_dir;
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, "no output directory");
  if (!fs::is_directory(config_.input_dir)) {
    throw Error(ErrorCode::kIo, "input directory not found: " + config_.input_dir.string());
  }
  if (seed_examples_.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "no seed examples (*.py) in " + config_.seed_examples_dir.string());
  }
  fs::create_directories(out);

  const fs::path manifest_path = out / "manifest.json";
  if (fs::exists(manifest_path)) {
    auto previous = PipelineManifest::from_json(detail::read_file(manifest_path));
    if (previous.root_seed != config_.root_seed ||
        previous.template_set_version != config_.template_set_version) {
      throw Error(ErrorCode::kInvalidArgument,
                  "output directory was built with a different seed or template set");
    }
    std::lock_guard lock(manifest_mutex_);
    manifest_.images = std::move(previous.images);
  }
  {
    std::lock_guard lock(manifest_mutex_);
    manifest_.run_counters.clear();
  }

  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(config_.input_dir)) {
    const auto name = entry.path().filename().string();
    if (name.empty() || name.front() == '.') continue;
    if (!kImageExtensions.contains(detail::to_lower(entry.path().extension().string()))) continue;
    if (entry.is_directory()) continue;
    inputs.push_back(entry.path());
  }
  std::sort(inputs.begin(), inputs.end());

  std::vector<ImageWork> works;
  std::set<std::string> ids;
  for (const auto& p : inputs) {
    std::string id = p.stem().string();
    for (int k = 2; ids.contains(id); ++k) id = p.stem().string() + "-" + std::to_string(k);
    ids.insert(id);
    works.push_back(ImageWork{id, p, {}});
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::optional<Error> fatal;
  auto worker = [&] {
    for (;;) {
      if (cancelled_.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= works.size()) return;
      try {
        if (!restore_image(works[i])) {
          works[i].records.clear();
          process_image(works[i]);
          write_jsonl(out / "records" / (works[i].id + ".jsonl"), works[i].records);
        }
      } catch (const Error& e) {
        std::lock_guard lock(error_mutex);
        if (!fatal) fatal = e;
        cancelled_.store(true);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (!fatal) fatal = Error(ErrorCode::kIo, e.what());
        cancelled_.store(true);
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(config_.workers, std::max<std::size_t>(1, works.size())); ++w) {
      pool.emplace_back(worker);
    }
  }
  if (fatal) {
    commit([](PipelineManifest&) {});
    throw *fatal;
  }
  if (cancelled_.load()) {
    commit([](PipelineManifest&) {});
    throw Error(ErrorCode::kCancelled, "build interrupted; manifest flushed");
  }

  // Aggregate in input order and drop duplicate record ids.
  std::vector<DatasetRecord> records;
  std::set<std::string> seen;
  std::size_t duplicates = 0;
  for (auto& w : works) {
    for (auto& r : w.records) {
      if (seen.insert(r.record_id).second) {
        records.push_back(std::move(r));
      } else {
        ++duplicates;
      }
    }
  }

  std::vector<ScoredRecord> scored(records.size());
  next.store(0);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(config_.workers, std::max<std::size_t>(1, records.size())); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < records.size() && !cancelled_.load();
             i = next.fetch_add(1)) {
          const double p = estimate_difficulty(records[i], resolve_image(records[i]), config_.difficulty_attempts);
          scored[i].record = records[i];
          scored[i].record.provenance["difficulty"] = format_p(p);
          scored[i].pass_probability = p;
        }
      });
    }
  }
  if (cancelled_.load()) {
    commit([](PipelineManifest&) {});
    throw Error(ErrorCode::kCancelled, "build interrupted; manifest flushed");
  }

  const std::size_t rl_size = config_.rl_size == 0 ? (scored.size() + 1) / 2 : config_.rl_size;
  const auto splits = curate_splits(scored, rl_size, derive_seed(config_.root_seed, "curate"), config_.weight_mode);
  write_jsonl(out / "splits" / "sft.jsonl", splits.sft);
  write_jsonl(out / "splits" / "rl.jsonl", splits.rl);

  BuildSummary summary;
  summary.images = works.size();
  summary.sft_records = splits.sft.size();
  summary.rl_records = splits.rl.size();
  for (const auto& r : splits.sft) summary.records_per_task[std::string(task_name(r.task))] += 1;

  commit([&](PipelineManifest& m) {
    for (auto& [id, e] : m.images) {
      if (e.status == ImageStatus::kActive && e.stage >= Stage::kQaVerified) m.advance(id, Stage::kCurated);
    }
    m.run_counters["records_sft"] = splits.sft.size();
    m.run_counters["records_rl"] = splits.rl.size();
    m.run_counters["duplicate_records"] = duplicates;
    m.run_counters["probe_failures"] = probe_failures_.load();
    summary.completed_images = m.reached(Stage::kCurated);
  });
  fs::remove_all(out / "work");
  return summary;
}

}  // namespace chartground
