// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <chrono>

#include "chartground/element_map.hpp"
#include "chartground/error.hpp"
#include "chartground/render_bridge.hpp"
#include "support.hpp"

using namespace chartground;
using Status = RenderResult::Status;
using std::chrono::seconds;

namespace {

SubprocessBridge fake() { return SubprocessBridge(testing::fixture("fake_bridge.sh")); }

}  // namespace

TEST_CASE("render result json round trip") {
  RenderResult r;
  r.status = Status::kOk;
  r.image = "out/chart.png";
  r.locations = "out/locations.json";
  r.width = 640;
  r.height = 480;
  const auto back = parse_render_result(render_result_to_json(r));
  CHECK(back.status == Status::kOk);
  CHECK(back.image == r.image);
  CHECK(back.locations == r.locations);
  CHECK(back.width == 640);
  CHECK_THROWS_AS(parse_render_result(R"({"status":"ok"})"), Error);
  CHECK_THROWS_AS(parse_render_result(R"({"status":"maybe"})"), Error);
  CHECK_THROWS_AS(parse_render_result("nope"), Error);
}

TEST_CASE("subprocess bridge success paths") {
  testing::TempDir dir;
  auto bridge = fake();
  auto r = bridge.render("FAKE_OK", dir / "a", false, seconds(10));
  CHECK(r.status == Status::kOk);
  CHECK(std::filesystem::exists(r.image));
  CHECK_FALSE(r.locations.has_value());
  CHECK(std::filesystem::exists(dir / "a/script.py"));

  r = bridge.render("FAKE_OK", dir / "b", true, seconds(10));
  REQUIRE(r.status == Status::kOk);
  REQUIRE(r.locations.has_value());
  CHECK(parse_location_file(testing::slurp(*r.locations)).box_count() == 1);
}

TEST_CASE("subprocess bridge failure paths") {
  testing::TempDir dir;
  auto bridge = fake();
  auto r = bridge.render("FAKE_ERROR", dir / "e", false, seconds(10));
  CHECK(r.status == Status::kError);
  CHECK(r.stderr_excerpt.find("NameError") != std::string::npos);

  r = bridge.render("FAKE_TIMEOUT", dir / "t", false, seconds(10));
  CHECK(r.status == Status::kTimeout);

  r = bridge.render("FAKE_GARBAGE", dir / "g", false, seconds(10));
  CHECK(r.status == Status::kError);

  r = bridge.render("FAKE_BADLOC", dir / "l", true, seconds(10));
  CHECK(r.status == Status::kError);
  CHECK(r.stderr_excerpt.find("self-check") != std::string::npos);

  testing::spit(dir / "busy/leftover.txt", "x");
  CHECK_THROWS_AS(bridge.render("FAKE_OK", dir / "busy", false, seconds(10)), Error);

  SubprocessBridge missing("/nonexistent/bridge");
  r = missing.render("FAKE_OK", dir / "m", false, seconds(10));
  CHECK(r.status == Status::kError);
}

TEST_CASE("subprocess bridge kills a hung child") {
  testing::TempDir dir;
  auto bridge = fake();
  const auto started = std::chrono::steady_clock::now();
  const auto r = bridge.render("FAKE_HANG", dir / "h", false, seconds(1));
  const auto elapsed = std::chrono::steady_clock::now() - started;
  CHECK(r.status == Status::kTimeout);
  CHECK(elapsed < seconds(15));
}

TEST_CASE("stub bridge") {
  testing::TempDir dir;
  StubBridge bridge;
  const auto script = testing::slurp(std::filesystem::path(CHARTGROUND_ASSET_DIR) / "seed_evolved/multi_subplot.py");
  auto r = bridge.render(script, dir / "ok", true, seconds(60));
  REQUIRE(r.status == Status::kOk);
  const auto map = parse_location_file(testing::slurp(*r.locations));
  CHECK(map.image_width == r.width);
  CHECK(map.subplots.size() == 2);
  CHECK(map.subplots[0].title->text == "Counts");

  const auto again = bridge.render(script, dir / "again", true, seconds(60));
  CHECK(testing::slurp(again.image) == testing::slurp(r.image));
  CHECK(testing::slurp(*again.locations) == testing::slurp(*r.locations));

  CHECK(bridge.render("while True:\n    pass\n", dir / "loop", false, seconds(60)).status == Status::kTimeout);
  CHECK(bridge.render("raise ValueError('x')\n", dir / "err", false, seconds(60)).status == Status::kError);
  CHECK(bridge.render("import matplotlib\n", dir / "noloc", true, seconds(60)).status == Status::kError);
}

TEST_CASE("blank png has a valid signature and header") {
  testing::TempDir dir;
  write_blank_png(dir / "b.png", 7, 3);
  const auto bytes = testing::slurp(dir / "b.png");
  REQUIRE(bytes.size() > 24);
  CHECK(bytes.substr(1, 3) == "PNG");
  CHECK(static_cast<unsigned char>(bytes[19]) == 7);  // width, big endian
  CHECK(static_cast<unsigned char>(bytes[23]) == 3);  // height
}
