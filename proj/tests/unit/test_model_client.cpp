// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>
#include <json.hpp>

#include <atomic>
#include <thread>

#include "chartground/error.hpp"
#include "chartground/model_client.hpp"
#include "chartground/prompts.hpp"
#include "chartground/reward.hpp"
#include "support.hpp"

using namespace chartground;
using nlohmann::json;

namespace {

// Minimal OpenAI-compatible server on a random local port.
class FakeProvider {
 public:
  explicit FakeProvider(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post(R"(/v1/chat/completions)", [this, handler](const httplib::Request& req, httplib::Response& res) {
      const int now = ++in_flight_;
      int seen = max_in_flight_.load();
      while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
      }
      ++requests_;
      handler(req, res);
      --in_flight_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeProvider() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int requests() const { return requests_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0}, in_flight_{0}, max_in_flight_{0};
};

void reply(httplib::Response& res, const std::string& text) {
  json body{{"model", "fake-1"}, {"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}, {"finish_reason", "stop"}}}}};
  res.set_content(body.dump(), "application/json");
}

ClientConfig live_config(const std::string& url, const std::filesystem::path& cache) {
  ClientConfig c;
  c.mode = ClientMode::kLive;
  c.endpoint = url;
  c.api_key = "sk-test";
  c.model = "fake-1";
  c.cache_dir = cache;
  c.backoff_base = std::chrono::milliseconds(1);
  c.timeout = std::chrono::seconds(5);
  return c;
}

}  // namespace

TEST_CASE("stub responses per purpose") {
  CachingModelClient client(ClientConfig{});
  const auto judge = client.complete(prompts::judge("x = 1", "x = 2"));
  CHECK(code_reward(judge.text, RewardConfig{}) == 1.0);
  CHECK(judge.text.find("\"data\":5") != std::string::npos);
  CHECK(client.complete(prompts::chart_filter(testing::fixture("two_subplot_locations.json"))).text == "chart");
  CHECK(client.calls() == 2);
}

TEST_CASE("stub responder overrides") {
  ClientConfig c;
  c.stub = [](const ModelRequest& r) -> std::optional<std::string> {
    if (r.purpose == Purpose::kJudge) return std::string("custom");
    return std::nullopt;
  };
  CachingModelClient client(c);
  CHECK(client.complete(prompts::judge("a", "b")).text == "custom");
  CHECK(client.complete(prompts::chart_filter(testing::fixture("two_subplot_locations.json"))).text == "chart");
}

TEST_CASE("idempotency keys") {
  const auto a = prompts::judge("x", "y");
  CHECK(a.idempotency_key() == prompts::judge("x", "y").idempotency_key());
  CHECK(a.idempotency_key() != prompts::judge("x", "z").idempotency_key());
  CHECK(a.idempotency_key().size() == 64);
  testing::TempDir dir;
  testing::spit(dir / "a.png", "pixels");
  testing::spit(dir / "sub/b.png", "pixels");
  CHECK(prompts::chart_filter(dir / "a.png").idempotency_key() == prompts::chart_filter(dir / "sub/b.png").idempotency_key());
  const auto p0 = prompts::difficulty_probe(dir / "a.png", "q", "qa", 0);
  const auto p1 = prompts::difficulty_probe(dir / "a.png", "q", "qa", 1);
  CHECK(p0.idempotency_key() != p1.idempotency_key());
}

TEST_CASE("replay serves recorded responses and names missing keys") {
  testing::TempDir dir;
  ClientConfig rec;
  rec.cache_dir = dir / "cache";
  CachingModelClient recorder(rec);
  const auto request = prompts::judge("x", "y");
  const auto original = recorder.complete(request).text;
  CHECK(std::filesystem::exists(recorder.cache_path(request.idempotency_key())));

  ClientConfig rep;
  rep.mode = ClientMode::kReplay;
  rep.cache_dir = dir / "cache";
  CachingModelClient replay(rep);
  CHECK(replay.complete(request).text == original);
  CHECK(replay.complete(request).text == original);

  const auto cold = prompts::judge("never", "seen");
  try {
    replay.complete(cold);
    FAIL("expected ReplayMiss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kReplayMiss);
    CHECK(std::string(e.what()).find(cold.idempotency_key()) != std::string::npos);
  }
  ClientConfig no_cache;
  no_cache.mode = ClientMode::kReplay;
  CHECK_THROWS_AS(CachingModelClient{no_cache}, Error);
}

TEST_CASE("live mode retries server errors and records the response") {
  testing::TempDir dir;
  std::atomic<int> calls{0};
  std::string auth, body;
  FakeProvider server([&](const httplib::Request& req, httplib::Response& res) {
    if (++calls == 1) {
      res.status = 503;
      return;
    }
    auth = req.get_header_value("Authorization");
    body = req.body;
    reply(res, "chart");
  });
  CachingModelClient client(live_config(server.url(), dir / "cache"));
  testing::spit(dir / "img.png", "not really a png");
  const auto request = prompts::chart_filter(dir / "img.png");
  const auto response = client.complete(request);
  CHECK(response.text == "chart");
  CHECK(server.requests() == 2);
  CHECK(response.provider_metadata.at("attempts") == "2");
  CHECK(auth == "Bearer sk-test");
  const auto sent = json::parse(body);
  CHECK(sent["model"] == "fake-1");
  CHECK(sent.dump().find("data:image/png;base64,") != std::string::npos);

  ClientConfig rep;
  rep.mode = ClientMode::kReplay;
  rep.cache_dir = dir / "cache";
  CHECK(CachingModelClient(rep).complete(request).text == "chart");
}

TEST_CASE("live mode gives up after three attempts and does not retry client errors") {
  testing::TempDir dir;
  FakeProvider failing([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  CachingModelClient a(live_config(failing.url(), dir / "a"));
  try {
    a.complete(prompts::judge("x", "y"));
    FAIL("expected ProviderError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kProviderError);
    CHECK(std::string(e.what()).find("500") != std::string::npos);
  }
  CHECK(failing.requests() == 3);

  FakeProvider rejecting([](const httplib::Request&, httplib::Response& res) {
    res.status = 401;
    res.set_content("bad key", "text/plain");
  });
  CachingModelClient b(live_config(rejecting.url(), dir / "b"));
  CHECK_THROWS_AS(b.complete(prompts::judge("x", "y")), Error);
  CHECK(rejecting.requests() == 1);
}

TEST_CASE("live mode caps requests in flight") {
  testing::TempDir dir;
  FakeProvider slow([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(60));
    reply(res, "ok");
  });
  auto cfg = live_config(slow.url(), dir / "cache");
  cfg.max_in_flight = 2;
  CachingModelClient client(cfg);
  std::vector<std::jthread> workers;
  for (int i = 0; i < 6; ++i) {
    workers.emplace_back([&, i] { client.complete(prompts::judge("x" + std::to_string(i), "y")); });
  }
  workers.clear();
  CHECK(slow.requests() == 6);
  CHECK(slow.max_in_flight() <= 2);
}

TEST_CASE("live mode without an endpoint") {
  ClientConfig c;
  c.mode = ClientMode::kLive;
  c.endpoint = "ftp://nowhere";
  CachingModelClient client(c);
  CHECK_THROWS_AS(client.complete(prompts::judge("x", "y")), Error);
}
