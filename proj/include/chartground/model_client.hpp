// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace chartground {

enum class Purpose { kChartToCode, kEvolve, kQaGenerate, kVerify, kJudge, kDifficultyProbe, kFilter };

std::string_view purpose_name(Purpose purpose);
std::optional<Purpose> purpose_from_name(std::string_view name);

struct Message {
  std::string role;  // system | user | assistant
  std::string text;
  std::optional<std::filesystem::path> image;
};

struct ModelRequest {
  Purpose purpose = Purpose::kFilter;
  /// Prompt template identifier, e.g. "filter.chart/v1".
  std::string template_id;
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_output_tokens = 2048;
  /// Distinguishes repeated samples of one prompt (difficulty probes).
  int sample_index = 0;

  /// SHA-256 over a canonical JSON rendering of the request. Images
  /// contribute their content hash, so the key survives moving files.
  std::string idempotency_key() const;
};

struct ModelResponse {
  std::string text;
  std::string finish_state;  // stop | length | replay | stub | ...
  std::chrono::milliseconds latency{0};
  std::map<std::string, std::string> provider_metadata;
};

enum class ClientMode { kLive, kReplay, kStub };

std::string_view client_mode_name(ClientMode mode);
std::optional<ClientMode> client_mode_from_name(std::string_view name);

/// Returns nullopt to fall through to the canned response.
using StubResponder = std::function<std::optional<std::string>(const ModelRequest&)>;

/// Canned deterministic text per purpose and template.
std::string default_stub_response(const ModelRequest& request);

struct ClientConfig {
  ClientMode mode = ClientMode::kStub;
  /// Replay cache directory; live and stub responses are recorded here when
  /// set. Required for replay mode.
  std::filesystem::path cache_dir;
  std::string endpoint;  // base URL of an OpenAI-compatible API
  std::string api_key;
  std::string model;
  std::map<Purpose, std::string> endpoint_overrides;
  std::size_t max_in_flight = 4;
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::seconds timeout{120};
  StubResponder stub;

  /// Reads CHARTGROUND_ENDPOINT, CHARTGROUND_API_KEY, CHARTGROUND_MODEL and
  /// CHARTGROUND_ENDPOINT_<PURPOSE> overrides.
  void load_environment();
};

/// Interface the pipeline talks to.
class ModelClient {
 public:
  virtual ~ModelClient() = default;
  /// Errors: kProviderError, kReplayMiss, kTimeout.
  virtual ModelResponse complete(const ModelRequest& request) = 0;
};

/// Live / replay / stub client. Shareable across threads.
class CachingModelClient final : public ModelClient {
 public:
  explicit CachingModelClient(ClientConfig config);
  ~CachingModelClient() override;

  ModelResponse complete(const ModelRequest& request) override;

  const ClientConfig& config() const noexcept { return config_; }
  std::size_t calls() const noexcept { return calls_.load(); }

  std::filesystem::path cache_path(const std::string& key) const;

 private:
  ModelResponse complete_live(const ModelRequest& request, const std::string& key);
  ModelResponse read_cache(const std::string& key) const;
  void write_cache(const std::string& key, const ModelRequest& request,
                   const ModelResponse& response) const;

  ClientConfig config_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
  std::atomic<std::size_t> calls_{0};
};

/// Builds the chat-completions JSON body sent in live mode.
std::string build_chat_body(const ModelRequest& request, std::string_view model);

}  // namespace chartground
