// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chartground/chartground.h"

namespace fs = std::filesystem;

namespace {

cg_context* g_ctx = nullptr;

extern "C" void on_signal(int) { cg_context_cancel(g_ctx); }

// Thrown for a failing library call; carries the message already formatted.
struct Failure {
  std::string message;
};

void check(cg_status s) {
  if (s != CG_OK) throw Failure{cg_last_error()};
}

// Owns a string returned by the library.
struct Owned {
  char* p = nullptr;
  ~Owned() { cg_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Common {
  std::string mode = "stub";
  std::string cache_dir;
  std::string model;
  std::string bridge = "stub";
  std::string assets_dir;
  std::uint64_t seed = 0;
  std::size_t max_in_flight = 4;
  double accuracy_weight = 0.9;
  std::vector<std::string> task_weights;  // task=value
  double epsilon = 1e-6;
  bool binary_iou = false;
};

void add_client_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--mode", c.mode, "Model client mode")->check(CLI::IsMember({"live", "replay", "stub"}));
  cmd->add_option("--cache-dir", c.cache_dir, "Replay cache directory");
  cmd->add_option("--model", c.model, "Model name for live mode");
  cmd->add_option("--max-in-flight", c.max_in_flight, "Concurrent model requests")->check(CLI::PositiveNumber);
}

void add_reward_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--accuracy-weight", c.accuracy_weight, "Weight a in a*acc + (1-a)*fmt")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--task-weight", c.task_weights, "Per-task override, e.g. grounding=0.8");
  cmd->add_option("--epsilon", c.epsilon, "Advantage std epsilon")->check(CLI::PositiveNumber);
  cmd->add_flag("--binary-iou", c.binary_iou, "Binarize grounding accuracy at IoU 0.5");
}

void set(cg_context* ctx, const std::string& key, const std::string& value) {
  check(cg_context_set_option(ctx, key.c_str(), value.c_str()));
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void apply_common(cg_context* ctx, const Common& c) {
  set(ctx, "mode", c.mode);
  if (!c.cache_dir.empty()) set(ctx, "cache_dir", c.cache_dir);
  if (!c.model.empty()) set(ctx, "model", c.model);
  if (!c.assets_dir.empty()) set(ctx, "assets_dir", c.assets_dir);
  set(ctx, "bridge", c.bridge);
  set(ctx, "seed", std::to_string(c.seed));
  set(ctx, "max_in_flight", std::to_string(c.max_in_flight));
  set(ctx, "accuracy_weight", num(c.accuracy_weight));
  set(ctx, "group_std_epsilon", num(c.epsilon));
  set(ctx, "iou_as_reward", c.binary_iou ? "false" : "true");
  for (const auto& tw : c.task_weights) {
    const auto eq = tw.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--task-weight", "expected task=value");
    set(ctx, "accuracy_weight." + tw.substr(0, eq), tw.substr(eq + 1));
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Failure{"cannot write " + path};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chart grounding dataset, reward and evaluation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cg_version()));

  Common common;

  // build-dataset
  auto* build = app.add_subcommand("build-dataset", "Run the dataset construction pipeline");
  std::string input_dir, output_dir, weight_mode = "one_minus_p", template_set = "v1";
  std::size_t workers = 1, rl_size = 0;
  int per_category = 3, probe_attempts = 8, render_timeout = 60;
  build->add_option("--input", input_dir, "Directory of source chart images")->required()->check(CLI::ExistingDirectory);
  build->add_option("--output", output_dir, "Output directory")->required();
  build->add_option("--seed", common.seed, "Root seed");
  build->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  build->add_option("--per-category", per_category, "Elements sampled per category")->check(CLI::PositiveNumber);
  build->add_option("--probe-attempts", probe_attempts, "Difficulty probes per record")->check(CLI::PositiveNumber);
  build->add_option("--rl-size", rl_size, "RL split size (0: half of SFT)");
  build->add_option("--weight-mode", weight_mode, "Difficulty weight")->check(CLI::IsMember({"one_minus_p", "p"}));
  build->add_option("--template-set", template_set, "Annotation template set");
  build->add_option("--bridge", common.bridge, "Render bridge executable, or 'stub'");
  build->add_option("--render-timeout", render_timeout, "Render timeout in seconds")->check(CLI::PositiveNumber);
  build->add_option("--assets-dir", common.assets_dir, "Directory holding seed_evolved/");
  add_client_flags(build, common);
  add_reward_flags(build, common);

  // render
  auto* render = app.add_subcommand("render", "Render plotting scripts through the bridge");
  std::vector<std::string> scripts;
  std::string render_out;
  bool emit_locations = false;
  render->add_option("--script", scripts, "Script file(s)")->required()->check(CLI::ExistingFile);
  render->add_option("--out", render_out, "Output directory (one subdirectory per script when several)")->required();
  render->add_flag("--emit-locations", emit_locations, "Expect a location file");
  render->add_option("--bridge", common.bridge, "Render bridge executable, or 'stub'");
  render->add_option("--timeout", render_timeout, "Timeout in seconds")->check(CLI::PositiveNumber);

  // reward
  auto* reward = app.add_subcommand("reward", "Score a rollout JSONL file");
  std::string reward_in, reward_out, judge_errors = "fail";
  reward->add_option("--in", reward_in, "Rollout JSONL")->required()->check(CLI::ExistingFile);
  reward->add_option("--out", reward_out, "Output JSONL (default: stdout)");
  reward->add_option("--judge-errors", judge_errors, "Judge parse failures: zero or fail")
      ->check(CLI::IsMember({"zero", "fail"}));
  add_client_flags(reward, common);
  add_reward_flags(reward, common);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against a grounding benchmark");
  std::string bench, pred, manifest, eval_out;
  double iou_threshold = 0.3;
  bool table = false;
  evaluate->add_option("--benchmark", bench, "Benchmark JSONL")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--pred", pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--iou", iou_threshold, "IoU threshold")->check(CLI::Range(0.0, 1.0));
  evaluate->add_option("--manifest", manifest, "Benchmark manifest to cross-check")->check(CLI::ExistingFile);
  evaluate->add_option("--out", eval_out, "Also write the report JSON here");
  evaluate->add_flag("--table", table, "Print a table instead of JSON");

  // stats
  auto* stats = app.add_subcommand("stats", "Dataset composition");
  std::string stats_in;
  bool stats_json = false;
  stats->add_option("--in", stats_in, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  stats->add_flag("--json", stats_json, "Emit JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (evaluate->parsed() && !(iou_threshold > 0.0)) {
    std::cerr << "--iou must be in (0, 1]\n" << evaluate->help();
    return 2;
  }

  cg_context* ctx = nullptr;
  if (cg_context_create(&ctx) != CG_OK) {
    std::cerr << "error: " << cg_last_error() << "\n";
    return 1;
  }
  struct Guard {
    cg_context*& c;
    ~Guard() {
      g_ctx = nullptr;
      cg_context_destroy(c);
    }
  } guard{ctx};

  try {
    apply_common(ctx, common);
    if (build->parsed()) {
      set(ctx, "workers", std::to_string(workers));
      set(ctx, "per_category", std::to_string(per_category));
      set(ctx, "probe_attempts", std::to_string(probe_attempts));
      set(ctx, "rl_size", std::to_string(rl_size));
      set(ctx, "weight_mode", weight_mode);
      set(ctx, "template_set", template_set);
      set(ctx, "render_timeout", std::to_string(render_timeout));
      g_ctx = ctx;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      Owned summary;
      check(cg_build_dataset(ctx, input_dir.c_str(), output_dir.c_str(), &summary.p));
      std::cout << summary.str() << "\n";
    } else if (render->parsed()) {
      set(ctx, "render_timeout", std::to_string(render_timeout));
      bool all_ok = true;
      for (const auto& script : scripts) {
        const fs::path dir = scripts.size() == 1 ? fs::path(render_out) : fs::path(render_out) / fs::path(script).stem();
        Owned result;
        check(cg_render_script(ctx, script.c_str(), dir.c_str(), emit_locations ? 1 : 0, &result.p));
        const auto text = result.str();
        std::cout << text << "\n";
        if (text.find("\"status\":\"ok\"") == std::string::npos) all_ok = false;
      }
      return all_ok ? 0 : 1;
    } else if (reward->parsed()) {
      set(ctx, "judge_errors", judge_errors);
      fs::path target = reward_out;
      fs::path temp;
      if (reward_out.empty()) {
        std::random_device rd;
        temp = fs::temp_directory_path() / ("chartground-reward-" + std::to_string(rd()) + ".jsonl");
        target = temp;
      }
      Owned summary;
      const auto s = cg_score_rollouts(ctx, reward_in.c_str(), target.c_str(), &summary.p);
      if (!temp.empty()) {
        if (s == CG_OK) {
          std::ifstream in(temp, std::ios::binary);
          std::cout << in.rdbuf();
        }
        std::error_code ec;
        fs::remove(temp, ec);
      }
      check(s);
      std::cerr << summary.str() << "\n";
    } else if (evaluate->parsed()) {
      const char* manifest_c = manifest.empty() ? nullptr : manifest.c_str();
      Owned report, warnings;
      check(cg_evaluate_files(ctx, bench.c_str(), pred.c_str(), iou_threshold, manifest_c, 0, &report.p,
                              &warnings.p));
      if (!eval_out.empty()) write_text(eval_out, report.str());
      for (const auto& w : nlohmann::json::parse(warnings.str())) std::cerr << "warning: " << w.get<std::string>() << "\n";
      if (table) {
        Owned text;
        check(cg_evaluate_files(ctx, bench.c_str(), pred.c_str(), iou_threshold, nullptr, 1, &text.p, nullptr));
        std::cout << text.str();
      } else {
        std::cout << report.str();
      }
    } else if (stats->parsed()) {
      Owned out;
      check(cg_dataset_stats(stats_in.c_str(), stats_json ? 0 : 1, &out.p));
      std::cout << out.str();
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return 1;
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 0;
}
