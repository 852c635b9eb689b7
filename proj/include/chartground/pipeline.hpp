// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chartground/annotation.hpp"
#include "chartground/element_map.hpp"
#include "chartground/model_client.hpp"
#include "chartground/render_bridge.hpp"
#include "chartground/reward.hpp"

namespace chartground {

enum class Stage {
  kIngested,
  kChartFiltered,
  kCoded,
  kRendered,
  kDistortionFiltered,
  kEvolved,
  kLocated,
  kQaGenerated,
  kQaVerified,
  kCurated,
};

std::string_view stage_name(Stage stage);
std::optional<Stage> stage_from_name(std::string_view name);

enum class ImageStatus { kActive, kDropped, kFailed };

std::string_view image_status_name(ImageStatus status);

struct ImageLedgerEntry {
  std::string image_id;
  std::string source;  // file name inside the input directory
  Stage stage = Stage::kIngested;
  ImageStatus status = ImageStatus::kActive;
  std::string reason;  // why dropped or failed
  int evolution_retries = 0;
  std::size_t subplot_count = 0;
  std::map<std::string, std::size_t> counters;
};

/// Per-image stage ledger plus counters. Stages only move forward; run-wide
/// counters are the per-image counters summed plus run-level ones.
struct PipelineManifest {
  std::uint64_t root_seed = 0;
  std::string template_set_version;
  std::string prompt_set_version;
  std::map<std::string, std::string> prompt_hashes;
  std::map<std::string, ImageLedgerEntry> images;
  std::map<std::string, std::size_t> run_counters;

  /// Moves the image forward; a stage at or before the current one is a
  /// no-op. Returns whether the stage changed. Unknown ids throw
  /// Error(kInvalidArgument).
  bool advance(const std::string& image_id, Stage stage);
  void mark(const std::string& image_id, ImageStatus status, std::string reason);
  void bump(const std::string& image_id, const std::string& counter, std::size_t by = 1);

  /// Number of images that reached at least `stage`.
  std::size_t reached(Stage stage) const;
  std::map<std::string, std::size_t> counters() const;

  std::string to_json() const;
  static PipelineManifest from_json(std::string_view json);
  /// write-temp-then-rename.
  void save(const std::filesystem::path& path) const;
};

enum class WeightMode { kOneMinusP, kP };

std::string_view weight_mode_name(WeightMode mode);
std::optional<WeightMode> weight_mode_from_name(std::string_view name);

inline constexpr double kMinSamplingWeight = 0.01;

struct ScoredRecord {
  DatasetRecord record;
  double pass_probability = 0.0;
};

struct Splits {
  std::vector<DatasetRecord> sft;
  std::vector<DatasetRecord> rl;
};

/// SFT = every record (split sft); RL = `rl_size` records drawn without
/// replacement with weight max(0.01, w(p)). Errors: kInsufficientRecords.
Splits curate_splits(const std::vector<ScoredRecord>& records, std::size_t rl_size,
                     std::uint64_t seed, WeightMode mode = WeightMode::kOneMinusP);

struct PipelineConfig {
  std::filesystem::path input_dir;
  std::filesystem::path output_dir;
  std::uint64_t root_seed = 0;
  std::size_t workers = 1;
  int per_category = 3;
  int difficulty_attempts = 8;
  /// 0 selects half of the SFT records, rounded up.
  std::size_t rl_size = 0;
  WeightMode weight_mode = WeightMode::kOneMinusP;
  int evolve_retries = 2;
  std::string template_set_version{kDefaultTemplateSet};
  std::chrono::seconds render_timeout{60};
  std::filesystem::path seed_examples_dir;
  RewardConfig reward;
  /// Accuracy at or above this counts as a correct probe for the
  /// continuous rewards (grounding IoU, judge score).
  double probe_success_threshold = 0.5;
};

struct FilterPartition {
  std::vector<std::string> kept;
  std::vector<std::string> dropped;
  std::vector<std::string> failed;
};

struct EvolutionOutcome {
  std::string script;
  int retries = 0;
  RenderResult render;
  ElementLocationMap locations;
};

struct QaOutcome {
  std::vector<QaPair> accepted;
  std::size_t candidates = 0;
  std::size_t hallucinated = 0;  // not groundable
  std::size_t unanswerable = 0;
  std::size_t incorrect = 0;
  std::size_t dropped_by_parser = 0;
  bool batch_rejected = false;
  std::string batch_reason;
};

struct BuildSummary {
  std::size_t images = 0;
  std::size_t completed_images = 0;
  std::size_t sft_records = 0;
  std::size_t rl_records = 0;
  std::map<std::string, std::size_t> records_per_task;
};

/// Dataset construction: filter, transcribe, render, distortion check,
/// evolve, locate, annotate, QA generation and verification, difficulty
/// probing, curation. All model traffic goes through `client` and all
/// script execution through `bridge`.
class Pipeline {
 public:
  Pipeline(ModelClient& client, RenderBridge& bridge, PipelineConfig config);

  // Individual stages, usable on their own.
  bool is_chart(const std::filesystem::path& image);
  FilterPartition filter_charts(const std::vector<std::filesystem::path>& images);
  std::string chart_to_code(const std::filesystem::path& image);
  bool filter_distorted(const std::filesystem::path& original, const RenderResult& reproduced);
  EvolutionOutcome evolve_code(std::string_view script,
                               const std::vector<std::string>& seed_examples,
                               const std::filesystem::path& workdir);
  QaOutcome generate_and_verify_qa(const std::filesystem::path& image, std::string_view script);
  double estimate_difficulty(const DatasetRecord& record, const std::filesystem::path& image,
                             int attempts);

  /// Runs every stage over input_dir and writes output_dir. Resumes from an
  /// existing manifest: images already past QA verification, dropped or
  /// failed are restored from their stage files instead of re-run.
  BuildSummary run();

  /// Asks a running build to stop after in-flight images; the manifest is
  /// flushed and run() throws Error(kCancelled).
  void cancel() noexcept { cancelled_.store(true); }

  const PipelineManifest& manifest() const noexcept { return manifest_; }
  std::vector<std::string> load_seed_examples() const;

 private:
  struct ImageWork {
    std::string id;
    std::filesystem::path source;
    std::vector<DatasetRecord> records;
  };
  void process_image(ImageWork& work);
  bool restore_image(ImageWork& work);
  std::filesystem::path resolve_image(const DatasetRecord& record) const;
  void commit(const std::function<void(PipelineManifest&)>& update);

  ModelClient& client_;
  RenderBridge& bridge_;
  PipelineConfig config_;
  PipelineManifest manifest_;
  std::mutex manifest_mutex_;
  std::atomic<bool> cancelled_{false};
  std::atomic<std::size_t> probe_failures_{0};
  std::vector<std::string> seed_examples_;
};

}  // namespace chartground
