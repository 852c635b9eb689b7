// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartground/chartground.h"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>

#include "chartground/dataset_stats.hpp"
#include "chartground/element_map.hpp"
#include "chartground/error.hpp"
#include "chartground/evaluator.hpp"
#include "chartground/geometry.hpp"
#include "chartground/model_client.hpp"
#include "chartground/pipeline.hpp"
#include "chartground/prompts.hpp"
#include "chartground/render_bridge.hpp"
#include "chartground/reward.hpp"
#include "text_util.hpp"

namespace cg = chartground;
namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

#ifndef CHARTGROUND_DEFAULT_ASSET_DIR
#define CHARTGROUND_DEFAULT_ASSET_DIR "assets"
#endif

struct cg_context {
  cg::ClientConfig client;
  cg::PipelineConfig pipeline;
  std::string bridge = "stub";
  fs::path assets_dir = CHARTGROUND_DEFAULT_ASSET_DIR;
  bool judge_errors_as_zero = false;
  std::atomic<bool> cancelled{false};
  std::atomic<cg::Pipeline*> active{nullptr};
};

struct cg_element_map {
  cg::ElementLocationMap map;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
cg_status guarded(F&& f) noexcept {
  try {
    f();
    g_last_error.clear();
    return CG_OK;
  } catch (const cg::Error& e) {
    g_last_error = e.what();
    return static_cast<cg_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CG_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CG_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return CG_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw cg::Error(cg::ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

cg::TaskKind to_task(cg_task task) {
  switch (task) {
    case CG_TASK_QA: return cg::TaskKind::kQa;
    case CG_TASK_GROUNDING: return cg::TaskKind::kGrounding;
    case CG_TASK_CHART_TO_CODE: return cg::TaskKind::kChartToCode;
  }
  throw cg::Error(cg::ErrorCode::kInvalidArgument, "unknown task");
}

cg::BBox to_box(const cg_box& b) { return cg::BBox(b.x_min, b.y_min, b.x_max, b.y_max); }

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw cg::Error(cg::ErrorCode::kInvalidArgument,
                    "option '" + std::string(key) + "': not a number: '" + std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw cg::Error(cg::ErrorCode::kInvalidArgument, "option '" + std::string(key) + "': expected a boolean");
}

const cg::RewardConfig& reward_of(const cg_context* ctx) {
  static const cg::RewardConfig defaults;
  return ctx ? ctx->pipeline.reward : defaults;
}

std::unique_ptr<cg::CachingModelClient> make_client(const cg_context& ctx) {
  auto config = ctx.client;
  if (config.mode == cg::ClientMode::kLive) config.load_environment();
  return std::make_unique<cg::CachingModelClient>(std::move(config));
}

std::unique_ptr<cg::RenderBridge> make_bridge(const cg_context& ctx) {
  if (ctx.bridge == "stub") return std::make_unique<cg::StubBridge>();
  return std::make_unique<cg::SubprocessBridge>(ctx.bridge);
}

}  // namespace

extern "C" {

const char* cg_version(void) { return "0.1.0"; }

const char* cg_status_name(cg_status status) {
  if (status == CG_OK) return "Ok";
  if (status == CG_ERR_INTERNAL) return "Internal";
  if (status >= CG_ERR_INVALID_ARGUMENT && status <= CG_ERR_CANCELLED) {
    return cg::error_code_name(static_cast<cg::ErrorCode>(status)).data();
  }
  return "Unknown";
}

const char* cg_last_error(void) { return g_last_error.c_str(); }

void cg_string_free(char* s) { std::free(s); }

cg_status cg_context_create(cg_context** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = new cg_context();
  });
}

void cg_context_destroy(cg_context* ctx) { delete ctx; }

cg_status cg_context_set_option(cg_context* ctx, const char* key_c, const char* value_c) {
  return guarded([&] {
    require(ctx && key_c && value_c, "null argument");
    const std::string key = key_c;
    const std::string value = value_c;
    auto& pc = ctx->pipeline;
    if (key == "mode") {
      auto mode = cg::client_mode_from_name(value);
      require(mode.has_value(), "mode must be live, replay or stub");
      ctx->client.mode = *mode;
    } else if (key == "cache_dir") {
      ctx->client.cache_dir = value;
    } else if (key == "model") {
      ctx->client.model = value;
    } else if (key == "seed") {
      pc.root_seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "workers") {
      pc.workers = parse_number<std::size_t>(key, value);
      require(pc.workers >= 1, "workers must be at least 1");
    } else if (key == "bridge") {
      ctx->bridge = value;
    } else if (key == "render_timeout") {
      const int s = parse_number<int>(key, value);
      require(s > 0, "render_timeout must be positive");
      pc.render_timeout = std::chrono::seconds(s);
    } else if (key == "per_category") {
      pc.per_category = parse_number<int>(key, value);
      require(pc.per_category >= 1, "per_category must be at least 1");
    } else if (key == "probe_attempts") {
      pc.difficulty_attempts = parse_number<int>(key, value);
      require(pc.difficulty_attempts >= 1, "probe_attempts must be at least 1");
    } else if (key == "rl_size") {
      pc.rl_size = parse_number<std::size_t>(key, value);
    } else if (key == "weight_mode") {
      auto mode = cg::weight_mode_from_name(value);
      require(mode.has_value(), "weight_mode must be one_minus_p or p");
      pc.weight_mode = *mode;
    } else if (key == "template_set") {
      pc.template_set_version = value;
    } else if (key == "accuracy_weight") {
      auto r = pc.reward;
      r.accuracy_weight = parse_number<double>(key, value);
      r.validate();
      pc.reward = r;
    } else if (key.starts_with("accuracy_weight.")) {
      auto task = cg::task_from_name(key.substr(std::strlen("accuracy_weight.")));
      require(task.has_value(), "unknown task in accuracy_weight.<task>");
      auto r = pc.reward;
      r.task_accuracy_weight[*task] = parse_number<double>(key, value);
      r.validate();
      pc.reward = r;
    } else if (key == "iou_as_reward") {
      pc.reward.iou_as_reward = parse_bool(key, value);
    } else if (key == "group_std_epsilon") {
      auto r = pc.reward;
      r.group_std_epsilon = parse_number<double>(key, value);
      r.validate();
      pc.reward = r;
    } else if (key == "judge_errors") {
      require(value == "zero" || value == "fail", "judge_errors must be zero or fail");
      ctx->judge_errors_as_zero = value == "zero";
    } else if (key == "max_in_flight") {
      ctx->client.max_in_flight = parse_number<std::size_t>(key, value);
      require(ctx->client.max_in_flight >= 1, "max_in_flight must be at least 1");
    } else if (key == "assets_dir") {
      ctx->assets_dir = value;
    } else {
      throw cg::Error(cg::ErrorCode::kInvalidArgument, "unknown option '" + key + "'");
    }
  });
}

void cg_context_cancel(cg_context* ctx) {
  if (!ctx) return;
  ctx->cancelled.store(true);
  if (auto* p = ctx->active.load()) p->cancel();
}

cg_status cg_iou(const cg_box* a, const cg_box* b, double* out) {
  return guarded([&] {
    require(a && b && out, "null argument");
    *out = cg::iou(to_box(*a), to_box(*b));
  });
}

cg_status cg_match_recall(const cg_box* preds, size_t n_preds, const cg_box* gts, size_t n_gts,
                          double threshold, size_t* matched, double* recall) {
  return guarded([&] {
    require((preds || n_preds == 0) && (gts || n_gts == 0) && matched && recall, "null argument");
    std::vector<cg::BBox> p, g;
    for (size_t i = 0; i < n_preds; ++i) p.push_back(to_box(preds[i]));
    for (size_t i = 0; i < n_gts; ++i) g.push_back(to_box(gts[i]));
    const auto r = cg::match_and_recall(p, g, threshold);
    *matched = r.matched;
    *recall = r.recall;
  });
}

cg_status cg_final_reward(double accuracy, int format, cg_task task, const cg_context* ctx, double* out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = cg::final_reward(accuracy, format, reward_of(ctx), to_task(task)).final;
  });
}

cg_status cg_group_advantages(const double* rewards, size_t n, const cg_context* ctx, double* out) {
  return guarded([&] {
    require((rewards || n == 0) && (out || n == 0), "null argument");
    const auto adv = cg::group_advantages(std::span<const double>(rewards, n), reward_of(ctx));
    std::copy(adv.begin(), adv.end(), out);
  });
}

cg_status cg_format_reward(cg_task task, const char* response, int* out) {
  return guarded([&] {
    require(response && out, "null argument");
    *out = cg::format_reward(cg::RolloutResponse{to_task(task), response});
  });
}

cg_status cg_code_reward(const char* judge_text, const cg_context* ctx, double* out) {
  return guarded([&] {
    require(judge_text && out, "null argument");
    *out = cg::code_reward(judge_text, reward_of(ctx));
  });
}

cg_status cg_answer_accuracy(const char* pred, const char* gt, int* out) {
  return guarded([&] {
    require(pred && gt && out, "null argument");
    *out = cg::answer_accuracy(pred, gt);
  });
}

cg_status cg_element_map_parse(const char* json, cg_element_map** out) {
  return guarded([&] {
    require(json && out, "null argument");
    auto holder = std::make_unique<cg_element_map>();
    holder->map = cg::parse_location_file(json);
    *out = holder.release();
  });
}

void cg_element_map_destroy(cg_element_map* map) { delete map; }

size_t cg_element_map_subplot_count(const cg_element_map* map) { return map ? map->map.subplots.size() : 0; }

size_t cg_element_map_box_count(const cg_element_map* map) { return map ? map->map.box_count() : 0; }

cg_status cg_element_map_serialize(const cg_element_map* map, char** out) {
  return guarded([&] {
    require(map && out, "null argument");
    *out = dup_string(cg::serialize_location_file(map->map));
  });
}

cg_status cg_element_map_sample(const cg_element_map* map, int per_category, uint64_t seed, char** out) {
  return guarded([&] {
    require(map && out, "null argument");
    ordered_json arr = ordered_json::array();
    for (const auto& s : cg::sample_elements(map->map, per_category, seed)) {
      const auto& b = s.element.box;
      arr.push_back({{"subplot_index", s.subplot_index},
                     {"category", cg::category_name(s.element.category)},
                     {"group", s.element.group},
                     {"text", s.element.text},
                     {"bbox", {b.x_min(), b.y_min(), b.x_max(), b.y_max()}}});
    }
    *out = dup_string(arr.dump());
  });
}

cg_status cg_evaluate_files(const cg_context*, const char* benchmark_path, const char* predictions_path,
                            double threshold, const char* manifest_path, int as_table, char** report_out,
                            char** warnings_json) {
  return guarded([&] {
    require(benchmark_path && predictions_path && report_out, "null argument");
    const auto items = cg::load_benchmark(benchmark_path);
    const auto preds = cg::load_predictions(predictions_path);
    const auto report = cg::evaluate(items, preds, threshold);
    ordered_json warnings = ordered_json::array();
    if (manifest_path && *manifest_path) {
      const auto manifest = cg::parse_benchmark_manifest(cg::detail::read_file(manifest_path));
      for (auto& w : cg::compare_with_manifest(cg::benchmark_stats(items), manifest)) warnings.push_back(w);
    }
    std::string text = as_table ? cg::report_to_table(report) : cg::report_to_json(report);
    if (warnings_json) *warnings_json = dup_string(warnings.dump());
    *report_out = dup_string(text);
  });
}

cg_status cg_score_rollouts(cg_context* ctx, const char* in_path, const char* out_path, char** summary_json) {
  return guarded([&] {
    require(ctx && in_path && out_path, "null argument");
    std::unique_ptr<cg::CachingModelClient> client;
    std::mutex client_mutex;
    cg::JudgeFn judge = [&](const std::string& candidate, const std::string& reference) {
      {
        std::lock_guard lock(client_mutex);
        if (!client) client = make_client(*ctx);
      }
      return client->complete(cg::prompts::judge(candidate, reference)).text;
    };
    const auto s = cg::score_rollout_file(in_path, out_path, ctx->pipeline.reward, judge, ctx->judge_errors_as_zero);
    if (summary_json) {
      ordered_json doc{{"groups", s.groups}, {"lines_written", s.lines_written}, {"judge_errors", s.judge_errors}};
      *summary_json = dup_string(doc.dump());
    }
  });
}

cg_status cg_build_dataset(cg_context* ctx, const char* input_dir, const char* output_dir, char** summary_json) {
  return guarded([&] {
    require(ctx && input_dir && output_dir, "null argument");
    auto config = ctx->pipeline;
    config.input_dir = input_dir;
    config.output_dir = output_dir;
    config.seed_examples_dir = ctx->assets_dir / "seed_evolved";
    auto client = make_client(*ctx);
    auto bridge = make_bridge(*ctx);
    cg::Pipeline pipeline(*client, *bridge, config);
    ctx->active.store(&pipeline);
    if (ctx->cancelled.load()) pipeline.cancel();
    struct Reset {
      cg_context* c;
      ~Reset() { c->active.store(nullptr); }
    } reset{ctx};
    const auto s = pipeline.run();
    if (summary_json) {
      ordered_json doc;
      doc["images"] = s.images;
      doc["completed_images"] = s.completed_images;
      doc["sft_records"] = s.sft_records;
      doc["rl_records"] = s.rl_records;
      doc["records_per_task"] = ordered_json::object();
      for (const auto& [k, v] : s.records_per_task) doc["records_per_task"][k] = v;
      doc["model_calls"] = client->calls();
      *summary_json = dup_string(doc.dump());
    }
  });
}

cg_status cg_render_script(cg_context* ctx, const char* script_path, const char* out_dir, int emit_locations,
                           char** result_json) {
  return guarded([&] {
    require(ctx && script_path && out_dir && result_json, "null argument");
    const auto script = cg::detail::read_file(script_path);
    auto bridge = make_bridge(*ctx);
    const auto result = bridge->render(script, out_dir, emit_locations != 0, ctx->pipeline.render_timeout);
    *result_json = dup_string(cg::render_result_to_json(result));
  });
}

cg_status cg_dataset_stats(const char* jsonl_path, int as_table, char** out) {
  return guarded([&] {
    require(jsonl_path && out, "null argument");
    const auto stats = cg::dataset_stats(cg::read_jsonl(jsonl_path));
    *out = dup_string(as_table ? cg::stats_to_table(stats) : cg::stats_to_json(stats));
  });
}

}  // extern "C"
