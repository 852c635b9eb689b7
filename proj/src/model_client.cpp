// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "chartground/model_client.hpp"

#include <cstdlib>
#include <regex>
#include <thread>

#include "chartground/error.hpp"
#include "chartground/hashing.hpp"
#include "chartground/prompts.hpp"
#include "text_util.hpp"

namespace chartground {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr Purpose kAllPurposes[] = {Purpose::kChartToCode, Purpose::kEvolve,
                                    Purpose::kQaGenerate,  Purpose::kVerify,
                                    Purpose::kJudge,       Purpose::kDifficultyProbe,
                                    Purpose::kFilter};

std::string image_digest(const std::filesystem::path& image) {
  try {
    return sha256_hex(detail::read_file(image));
  } catch (const Error&) {
    return "unreadable:" + image.filename().string();
  }
}

std::string mime_for(const std::filesystem::path& image) {
  const auto ext = detail::to_lower(image.extension().string());
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "image/png";
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

// Code inside the first python fence following `marker`.
std::string fenced_after(std::string_view text, std::string_view marker) {
  const auto pos = text.find(marker);
  if (pos == std::string_view::npos) return {};
  auto blocks = detail::fenced_blocks(text.substr(pos));
  return blocks.empty() ? std::string() : blocks.front().body;
}

std::string stub_chart_script(const ModelRequest& request) {
  std::string stem = "chart";
  for (const auto& m : request.messages) {
    if (m.image) stem = m.image->stem().string();
  }
  return "```python\n"
         "import matplotlib.pyplot as plt\n"
         "\n"
         "fig, ax = plt.subplots(figsize=(6.4, 4.8))\n"
         "ax.bar(['A', 'B', 'C', 'D'], [3, 5, 2, 4], label='series')\n"
         "ax.set_title('Chart " + stem + "')\n"
         "ax.set_xlabel('Category')\n"
         "ax.set_ylabel('Value')\n"
         "ax.legend()\n"
         "```";
}

std::string stub_qa(const ModelRequest& request) {
  std::string title = "untitled";
  static const std::regex title_re(R"(set_title\(\s*['"]([^'"]*)['"])");
  for (const auto& m : request.messages) {
    std::smatch match;
    if (std::regex_search(m.text, match, title_re)) title = match[1].str();
  }
  ordered_json qa = ordered_json::array();
  qa.push_back({{"question", "What is the title of the chart?"}, {"answer", title}, {"scope", "local"}});
  qa.push_back({{"question", "What is the label of the x-axis?"}, {"answer", "Category"}, {"scope", "local"}});
  qa.push_back({{"question", "What is the label of the y-axis?"}, {"answer", "Value"}, {"scope", "local"}});
  qa.push_back({{"question", "Which category has the highest value?"}, {"answer", "B"}, {"scope", "global"}});
  qa.push_back({{"question", "Which category has the lowest value?"}, {"answer", "C"}, {"scope", "global"}});
  qa.push_back({{"question", "What is the value of category A?"}, {"answer", "3"}, {"scope", "local"}});
  qa.push_back({{"question", "What is the sum of all values?"}, {"answer", "14"}, {"scope", "global"}});
  qa.push_back({{"question", "How many bars are shown?"}, {"answer", "4"}, {"scope", "global"}});
  qa.push_back({{"question", "What is the difference between B and C?"}, {"answer", "3"}, {"scope", "global"}});
  qa.push_back({{"question", "What is the value of category D?"}, {"answer", "4"}, {"scope", "local"}});
  return "```json\n" + qa.dump(1) + "\n```";
}

std::string stub_verdicts(const ModelRequest& request) {
  std::size_t n = 0;
  for (const auto& m : request.messages) {
    const auto pos = m.text.find("Candidates:");
    if (pos == std::string::npos) continue;
    for (auto& block : detail::fenced_blocks(std::string_view(m.text).substr(pos))) {
      auto parsed = json::parse(block.body, nullptr, false);
      if (!parsed.is_discarded() && parsed.is_array()) n = parsed.size();
      break;
    }
  }
  ordered_json out = ordered_json::array();
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({{"groundable", true}, {"answerable", true}, {"correct", true}});
  }
  return out.dump();
}

struct Endpoint {
  std::string scheme_host_port;
  std::string path_prefix;
};

Endpoint split_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(ErrorCode::kInvalidArgument, "endpoint must be an http(s) URL: '" + url + "'");
  }
  std::string prefix = m[2].matched ? m[2].str() : "";
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {m[1].str(), prefix};
}

}  // namespace

std::string_view purpose_name(Purpose purpose) {
  switch (purpose) {
    case Purpose::kChartToCode: return "chart_to_code";
    case Purpose::kEvolve: return "evolve";
    case Purpose::kQaGenerate: return "qa_generate";
    case Purpose::kVerify: return "verify";
    case Purpose::kJudge: return "judge";
    case Purpose::kDifficultyProbe: return "difficulty_probe";
    case Purpose::kFilter: return "filter";
  }
  return "filter";
}

std::optional<Purpose> purpose_from_name(std::string_view name) {
  for (auto p : kAllPurposes) {
    if (purpose_name(p) == name) return p;
  }
  return std::nullopt;
}

std::string_view client_mode_name(ClientMode mode) {
  switch (mode) {
    case ClientMode::kLive: return "live";
    case ClientMode::kReplay: return "replay";
    case ClientMode::kStub: return "stub";
  }
  return "stub";
}

std::optional<ClientMode> client_mode_from_name(std::string_view name) {
  for (auto m : {ClientMode::kLive, ClientMode::kReplay, ClientMode::kStub}) {
    if (client_mode_name(m) == name) return m;
  }
  return std::nullopt;
}

std::string ModelRequest::idempotency_key() const {
  ordered_json doc;
  doc["purpose"] = purpose_name(purpose);
  doc["template_id"] = template_id;
  doc["messages"] = ordered_json::array();
  for (const auto& m : messages) {
    ordered_json msg;
    msg["role"] = m.role;
    msg["text"] = m.text;
    msg["image_sha256"] = m.image ? ordered_json(image_digest(*m.image)) : ordered_json(nullptr);
    doc["messages"].push_back(std::move(msg));
  }
  doc["temperature"] = temperature;
  doc["max_output_tokens"] = max_output_tokens;
  doc["sample_index"] = sample_index;
  return sha256_hex(doc.dump());
}

std::string default_stub_response(const ModelRequest& request) {
  const std::string_view id = request.template_id;
  if (id == prompts::kChartFilter) return "chart";
  if (id == prompts::kDistortionFilter) return "faithful";
  if (id == prompts::kChartToCode) return stub_chart_script(request);
  if (id == prompts::kEvolve || id == prompts::kEvolveRepair) {
    std::string script;
    for (const auto& m : request.messages) {
      auto found = fenced_after(m.text, "Script to evolve:");
      if (!found.empty()) script = std::move(found);
    }
    return "```python\n" + script +
           "\n# element locations, image pixels with a top-left origin\n"
           "save_locations(fig, 'locations.json')\n```";
  }
  if (id == prompts::kQaGenerate) return stub_qa(request);
  if (id == prompts::kVerify) return stub_verdicts(request);
  if (id == prompts::kJudge) {
    return R"({"data":5,"plot type structure":5,"axes scales and limits":5,"text elements":5,"styling":5})";
  }
  if (id == prompts::kDifficultyProbe) return "<think>stub</think><answer>unknown</answer>";
  return "stub";
}

void ClientConfig::load_environment() {
  if (const char* v = std::getenv("CHARTGROUND_ENDPOINT")) endpoint = v;
  if (const char* v = std::getenv("CHARTGROUND_API_KEY")) api_key = v;
  if (const char* v = std::getenv("CHARTGROUND_MODEL")) model = v;
  for (auto p : kAllPurposes) {
    const std::string var = "CHARTGROUND_ENDPOINT_" + upper(purpose_name(p));
    if (const char* v = std::getenv(var.c_str())) endpoint_overrides[p] = v;
  }
}

std::string build_chat_body(const ModelRequest& request, std::string_view model) {
  ordered_json body;
  body["model"] = model;
  body["messages"] = ordered_json::array();
  for (const auto& m : request.messages) {
    ordered_json msg;
    msg["role"] = m.role;
    if (m.image) {
      const auto bytes = detail::read_file(*m.image);
      const auto b64 = base64_encode(
          std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
      msg["content"] = ordered_json::array(
          {ordered_json{{"type", "text"}, {"text", m.text}},
           ordered_json{{"type", "image_url"},
                        {"image_url", {{"url", "data:" + mime_for(*m.image) + ";base64," + b64}}}}});
    } else {
      msg["content"] = m.text;
    }
    body["messages"].push_back(std::move(msg));
  }
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_output_tokens;
  return body.dump();
}

CachingModelClient::CachingModelClient(ClientConfig config)
    : config_(std::move(config)),
      in_flight_(std::make_unique<std::counting_semaphore<>>(
          static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_in_flight)))) {
  if (config_.mode == ClientMode::kReplay && config_.cache_dir.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "replay mode needs a cache directory");
  }
  if (config_.mode == ClientMode::kLive && config_.endpoint.empty() && config_.endpoint_overrides.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "live mode needs CHARTGROUND_ENDPOINT");
  }
}

CachingModelClient::~CachingModelClient() = default;

std::filesystem::path CachingModelClient::cache_path(const std::string& key) const {
  return config_.cache_dir / key.substr(0, 2) / (key + ".json");
}

ModelResponse CachingModelClient::complete(const ModelRequest& request) {
  ++calls_;
  const std::string key = request.idempotency_key();
  switch (config_.mode) {
    case ClientMode::kReplay: return read_cache(key);
    case ClientMode::kStub: {
      std::optional<std::string> text;
      if (config_.stub) text = config_.stub(request);
      ModelResponse response;
      response.text = text ? std::move(*text) : default_stub_response(request);
      response.finish_state = "stub";
      if (!config_.cache_dir.empty()) write_cache(key, request, response);
      return response;
    }
    case ClientMode::kLive: {
      auto response = complete_live(request, key);
      if (!config_.cache_dir.empty()) write_cache(key, request, response);
      return response;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown client mode");
}

ModelResponse CachingModelClient::read_cache(const std::string& key) const {
  const auto path = cache_path(key);
  std::string raw;
  try {
    raw = detail::read_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::kReplayMiss, "no cached response for key " + key);
  }
  auto doc = json::parse(raw, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("text") || !doc["text"].is_string()) {
    throw Error(ErrorCode::kMalformedJson, "corrupt cache entry " + path.string());
  }
  ModelResponse response;
  response.text = doc["text"].get<std::string>();
  response.finish_state = "replay";
  if (doc.contains("provider_metadata") && doc["provider_metadata"].is_object()) {
    for (const auto& [k, v] : doc["provider_metadata"].items()) {
      response.provider_metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  return response;
}

void CachingModelClient::write_cache(const std::string& key, const ModelRequest& request,
                                     const ModelResponse& response) const {
  ordered_json doc;
  doc["key"] = key;
  doc["purpose"] = purpose_name(request.purpose);
  doc["template_id"] = request.template_id;
  doc["text"] = response.text;
  doc["finish_state"] = response.finish_state;
  doc["provider_metadata"] = ordered_json::object();
  for (const auto& [k, v] : response.provider_metadata) doc["provider_metadata"][k] = v;
  // Unique temp name per writer; rename makes the entry appear atomically.
  auto tmp_name = key + "." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  const auto final_path = cache_path(key);
  const auto tmp_path = final_path.parent_path() / tmp_name;
  std::filesystem::create_directories(final_path.parent_path());
  detail::write_file_atomic(tmp_path, doc.dump(1));
  std::error_code ec;
  std::filesystem::rename(tmp_path, final_path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot publish cache entry " + final_path.string());
}

ModelResponse CachingModelClient::complete_live(const ModelRequest& request, const std::string& key) {
  auto route = config_.endpoint_overrides.find(request.purpose);
  const auto endpoint = split_endpoint(route != config_.endpoint_overrides.end() ? route->second
                                                                                : config_.endpoint);
  const std::string body = build_chat_body(request, config_.model);

  struct Permit {
    std::counting_semaphore<>& sem;
    explicit Permit(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
    ~Permit() { sem.release(); }
  } permit(*in_flight_);

  Error last(ErrorCode::kProviderError, "no attempt made");
  for (int attempt = 0; attempt < std::max(1, config_.max_attempts); ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.backoff_base * (1 << (attempt - 1)));

    httplib::Client client(endpoint.scheme_host_port);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    headers.emplace("Idempotency-Key", key);

    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(endpoint.path_prefix + "/chat/completions", headers, body, "application/json");
    const auto latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
      last = Error(timed_out ? ErrorCode::kTimeout : ErrorCode::kProviderError,
                   "status 0: " + httplib::to_string(err));
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last = Error(ErrorCode::kProviderError, "status " + std::to_string(res->status));
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::kProviderError,
                  "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    auto doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() ||
        doc["choices"].empty()) {
      throw Error(ErrorCode::kProviderError, "status 200 with an unrecognized body");
    }
    const auto& choice = doc["choices"][0];
    ModelResponse response;
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      response.text = choice["message"]["content"].get<std::string>();
    }
    response.finish_state = choice.value("finish_reason", std::string("stop"));
    response.latency = latency;
    if (doc.contains("model") && doc["model"].is_string()) {
      response.provider_metadata["model"] = doc["model"].get<std::string>();
    }
    if (doc.contains("usage") && doc["usage"].is_object()) {
      response.provider_metadata["usage"] = doc["usage"].dump();
    }
    response.provider_metadata["attempts"] = std::to_string(attempt + 1);
    return response;
  }
  throw last;
}

}  // namespace chartground
