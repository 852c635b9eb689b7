// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace chartground {

struct RenderResult {
  enum class Status { kOk, kError, kTimeout };

  Status status = Status::kError;
  std::filesystem::path image;
  std::optional<std::filesystem::path> locations;
  int width = 0;
  int height = 0;
  std::string stderr_excerpt;
};

std::string_view render_status_name(RenderResult::Status status);

/// Parses the single-line JSON a bridge prints on stdout. Errors:
/// kMalformedJson, kSchemaViolation.
RenderResult parse_render_result(std::string_view line);
std::string render_result_to_json(const RenderResult& result);

/// Executes a plotting script and reports the rendered image and, when asked,
/// the element-location file.
class RenderBridge {
 public:
  virtual ~RenderBridge() = default;
  /// `workdir` must be empty (it is created when missing).
  virtual RenderResult render(std::string_view script, const std::filesystem::path& workdir,
                              bool emit_locations, std::chrono::seconds timeout) = 0;
};

/// Runs an external bridge executable:
///   <exe> --script <file> --out <dir> --timeout <s> [--emit-locations]
/// exit 0/1/124 = ok/error/timeout, one JSON line on stdout. Results claiming
/// ok are checked: the image must exist and a locations file must parse.
class SubprocessBridge final : public RenderBridge {
 public:
  explicit SubprocessBridge(std::filesystem::path executable);
  RenderResult render(std::string_view script, const std::filesystem::path& workdir,
                      bool emit_locations, std::chrono::seconds timeout) override;

 private:
  std::filesystem::path executable_;
};

/// In-process stand-in used in stub mode: writes a blank PNG and a synthetic
/// location file derived from the script's title and axis-label calls.
/// Scripts containing "raise" or "syntax error" fail like a real render.
class StubBridge final : public RenderBridge {
 public:
  RenderResult render(std::string_view script, const std::filesystem::path& workdir,
                      bool emit_locations, std::chrono::seconds timeout) override;
};

/// Writes a white 8-bit grayscale PNG.
void write_blank_png(const std::filesystem::path& path, int width, int height);

}  // namespace chartground
