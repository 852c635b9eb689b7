// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartground/render_bridge.hpp"

#include <json.hpp>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <regex>
#include <vector>

#include "chartground/element_map.hpp"
#include "chartground/error.hpp"
#include "text_util.hpp"

namespace chartground {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kStderrExcerpt = 2000;
constexpr auto kKillGrace = std::chrono::seconds(5);

void prepare_workdir(const fs::path& workdir) {
  fs::create_directories(workdir);
  if (!fs::is_empty(workdir)) {
    throw Error(ErrorCode::kInvalidArgument, "render workdir is not empty: " + workdir.string());
  }
}

std::string tail(std::string_view text, std::size_t n) {
  return std::string(text.size() > n ? text.substr(text.size() - n) : text);
}

RenderResult failure(RenderResult::Status status, std::string why) {
  RenderResult r;
  r.status = status;
  r.stderr_excerpt = std::move(why);
  return r;
}

/// Downgrades an ok result that does not hold up: missing image, bad
/// dimensions, or a locations file that fails validation.
void self_check(RenderResult& r, bool emit_locations) {
  if (r.status != RenderResult::Status::kOk) return;
  std::string why;
  if (!fs::is_regular_file(r.image)) {
    why = "image not found: " + r.image.string();
  } else if (r.width <= 0 || r.height <= 0) {
    why = "non-positive image dimensions";
  } else if (emit_locations && !r.locations) {
    why = "no locations file was written";
  } else if (r.locations) {
    try {
      auto map = parse_location_file(detail::read_file(*r.locations));
      if (map.image_width != r.width || map.image_height != r.height) {
        why = "locations image size differs from the rendered image";
      }
    } catch (const Error& e) {
      why = std::string("schema self-check failed: ") + e.what();
    }
  }
  if (!why.empty()) {
    r.status = RenderResult::Status::kError;
    r.stderr_excerpt = why + (r.stderr_excerpt.empty() ? "" : "\n" + r.stderr_excerpt);
  }
}

std::vector<std::string> all_matches(const std::string& text, const std::regex& re) {
  std::vector<std::string> out;
  for (std::sregex_iterator it(text.begin(), text.end(), re), end; it != end; ++it) {
    out.push_back((*it)[1].str());
  }
  return out;
}

double text_width(const std::string& s) { return 7.0 * static_cast<double>(std::max<std::size_t>(1, s.size())); }

}  // namespace

std::string_view render_status_name(RenderResult::Status status) {
  switch (status) {
    case RenderResult::Status::kOk: return "ok";
    case RenderResult::Status::kError: return "error";
    case RenderResult::Status::kTimeout: return "timeout";
  }
  return "error";
}

RenderResult parse_render_result(std::string_view line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedJson, e.what());
  }
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kSchemaViolation, why); };
  if (!doc.is_object()) fail("render result: expected an object");
  if (!doc.contains("status") || !doc["status"].is_string()) fail("status: expected a string");
  RenderResult r;
  const auto status = doc["status"].get<std::string>();
  if (status == "ok") {
    r.status = RenderResult::Status::kOk;
  } else if (status == "error") {
    r.status = RenderResult::Status::kError;
  } else if (status == "timeout") {
    r.status = RenderResult::Status::kTimeout;
  } else {
    fail("status: expected ok, error or timeout");
  }
  if (doc.contains("image") && doc["image"].is_string()) r.image = doc["image"].get<std::string>();
  if (doc.contains("locations") && doc["locations"].is_string()) {
    r.locations = fs::path(doc["locations"].get<std::string>());
  }
  for (auto [key, slot] : {std::pair{"width", &r.width}, std::pair{"height", &r.height}}) {
    if (doc.contains(key) && !doc[key].is_null()) {
      if (!doc[key].is_number_integer()) fail(std::string(key) + ": expected an integer");
      *slot = doc[key].get<int>();
    }
  }
  if (doc.contains("stderr") && doc["stderr"].is_string()) r.stderr_excerpt = doc["stderr"].get<std::string>();
  if (r.status == RenderResult::Status::kOk && r.image.empty()) fail("image: required when status is ok");
  return r;
}

std::string render_result_to_json(const RenderResult& r) {
  ordered_json doc;
  doc["status"] = render_status_name(r.status);
  doc["image"] = r.image.string();
  doc["locations"] = r.locations ? ordered_json(r.locations->string()) : ordered_json(nullptr);
  doc["width"] = r.width;
  doc["height"] = r.height;
  doc["stderr"] = r.stderr_excerpt;
  return doc.dump();
}

SubprocessBridge::SubprocessBridge(fs::path executable) : executable_(std::move(executable)) {}

RenderResult SubprocessBridge::render(std::string_view script, const fs::path& workdir,
                                      bool emit_locations, std::chrono::seconds timeout) {
  prepare_workdir(workdir);
  const fs::path script_path = workdir / "script.py";
  const fs::path out_dir = workdir / "render";
  fs::create_directories(out_dir);
  detail::write_file_atomic(script_path, script);

  std::vector<std::string> args = {executable_.string(), "--script", script_path.string(), "--out",
                                   out_dir.string(), "--timeout", std::to_string(timeout.count())};
  if (emit_locations) args.emplace_back("--emit-locations");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  int out_pipe[2];
  int err_pipe[2];
  if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0) {
    throw Error(ErrorCode::kIo, std::string("pipe: ") + std::strerror(errno));
  }
  const pid_t pid = fork();
  if (pid < 0) throw Error(ErrorCode::kIo, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    setpgid(0, 0);  // own group so a timeout kill reaches grandchildren
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    close(out_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[0]);
    close(err_pipe[1]);
    execv(argv[0], argv.data());
    _exit(127);
  }
  setpgid(pid, pid);
  close(out_pipe[1]);
  close(err_pipe[1]);

  std::string out_text;
  std::string err_text;
  const auto deadline = std::chrono::steady_clock::now() + timeout + kKillGrace;
  bool killed = false;
  pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  int open_fds = 2;
  char buf[4096];
  while (open_fds > 0) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      killed = true;
      break;
    }
    if (poll(fds, 2, static_cast<int>(std::min<long long>(left.count(), 1000))) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (int i = 0; i < 2; ++i) {
      if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const ssize_t n = read(fds[i].fd, buf, sizeof(buf));
      if (n > 0) {
        (i == 0 ? out_text : err_text).append(buf, static_cast<std::size_t>(n));
      } else {
        close(fds[i].fd);
        fds[i].fd = -1;
        --open_fds;
      }
    }
  }
  for (auto& f : fds) {
    if (f.fd >= 0) close(f.fd);
  }
  int wstatus = 0;
  waitpid(pid, &wstatus, 0);

  if (killed) {
    return failure(RenderResult::Status::kTimeout, "bridge killed after " +
                                                       std::to_string(timeout.count()) + " s\n" +
                                                       tail(err_text, kStderrExcerpt));
  }
  const int code = WIFEXITED(wstatus) ? WEXITSTATUS(wstatus) : -1;

  // The result is the last non-empty stdout line.
  std::string_view last;
  std::string_view rest = out_text;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    const auto line = detail::trim(rest.substr(0, nl));
    if (!line.empty()) last = line;
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  RenderResult result;
  try {
    result = parse_render_result(last);
  } catch (const Error& e) {
    const auto status = code == 124 ? RenderResult::Status::kTimeout : RenderResult::Status::kError;
    return failure(status, "bridge exited " + std::to_string(code) + " without a valid result (" +
                               e.detail() + ")\n" + tail(err_text, kStderrExcerpt));
  }
  if (code == 124) result.status = RenderResult::Status::kTimeout;
  if (code != 0 && result.status == RenderResult::Status::kOk) result.status = RenderResult::Status::kError;
  if (result.stderr_excerpt.empty()) result.stderr_excerpt = tail(err_text, kStderrExcerpt);
  if (!result.image.empty() && result.image.is_relative()) result.image = out_dir / result.image;
  if (result.locations && result.locations->is_relative()) result.locations = out_dir / *result.locations;
  self_check(result, emit_locations);
  return result;
}

RenderResult StubBridge::render(std::string_view script_view, const fs::path& workdir,
                                bool emit_locations, std::chrono::seconds timeout) {
  prepare_workdir(workdir);
  const std::string script(script_view);
  if (script.find("while True") != std::string::npos) {
    return failure(RenderResult::Status::kTimeout,
                   "render exceeded " + std::to_string(timeout.count()) + " s");
  }
  if (script.find("raise ") != std::string::npos || script.find("syntax error") != std::string::npos) {
    return failure(RenderResult::Status::kError,
                   "Traceback (most recent call last):\n  File \"script.py\"\nRuntimeError: script failed");
  }
  if (emit_locations && script.find("locations.json") == std::string::npos) {
    return failure(RenderResult::Status::kError, "script did not write locations.json");
  }

  constexpr int kWidth = 640;
  constexpr int kHeight = 480;
  RenderResult r;
  r.status = RenderResult::Status::kOk;
  r.width = kWidth;
  r.height = kHeight;
  r.image = workdir / "chart.png";
  write_blank_png(r.image, kWidth, kHeight);
  if (!emit_locations) return r;

  static const std::regex title_re(R"((?:set_title|plt\.title)\(\s*['"]([^'"]*)['"])");
  static const std::regex xlabel_re(R"((?:set_xlabel|plt\.xlabel)\(\s*['"]([^'"]*)['"])");
  static const std::regex ylabel_re(R"((?:set_ylabel|plt\.ylabel)\(\s*['"]([^'"]*)['"])");
  static const std::regex legend_re(R"(label\s*=\s*['"]([^'"]+)['"])");
  static const std::regex categories_re(R"(\[\s*'([^']*)'(?:\s*,\s*'[^']*')*\s*\])");
  static const std::regex quoted_re(R"('([^']*)')");

  const auto titles = all_matches(script, title_re);
  const auto xlabels = all_matches(script, xlabel_re);
  const auto ylabels = all_matches(script, ylabel_re);
  const auto legends = all_matches(script, legend_re);
  std::vector<std::string> xticks = {"0", "1", "2", "3", "4"};
  std::smatch cats;
  if (std::regex_search(script, cats, categories_re)) {
    xticks = all_matches(cats[0].str(), quoted_re);
  }
  const std::vector<std::string> yticks = {"0", "2", "4", "6"};

  ElementLocationMap map;
  map.image_id = "chart";
  map.image_width = kWidth;
  map.image_height = kHeight;
  const std::size_t n = std::max<std::size_t>(1, titles.size());
  const double region = static_cast<double>(kWidth) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    SubplotElements s;
    s.subplot_index = static_cast<int>(i);
    const double x0 = region * static_cast<double>(i);
    const double left = x0 + 60.0;
    const double right = x0 + region - 20.0;
    const double top = 50.0;
    const double bottom = kHeight - 60.0;
    const double cx = (left + right) / 2.0;
    const double cy = (top + bottom) / 2.0;
    const double max_w = region - 10.0;
    auto hbox = [&](const std::string& text, double y0, double y1) {
      const double w = std::min(text_width(text), max_w);
      return BBox(cx - w / 2.0, y0, cx + w / 2.0, y1);
    };
    if (i < titles.size() && !titles[i].empty()) {
      s.title = LabeledBox{hbox(titles[i], 20.0, 38.0), titles[i], ElementCategory::kTitle, ""};
    }
    const std::string xname = i < xlabels.size() && !xlabels[i].empty() ? xlabels[i] : "x-axis";
    const std::string yname = i < ylabels.size() && !ylabels[i].empty() ? ylabels[i] : "y-axis";
    if (i < xlabels.size() && !xlabels[i].empty()) {
      s.x_axis_names.push_back({hbox(xlabels[i], kHeight - 26.0, kHeight - 10.0), xlabels[i],
                                ElementCategory::kXAxisName, ""});
    }
    if (i < ylabels.size() && !ylabels[i].empty()) {
      const double h = std::min(text_width(ylabels[i]), bottom - top);
      s.y_axis_names.push_back({BBox(x0 + 6.0, cy - h / 2.0, x0 + 20.0, cy + h / 2.0), ylabels[i],
                                ElementCategory::kYAxisName, ""});
    }
    auto& xs = s.x_axis_ticks[xname];
    for (std::size_t k = 0; k < xticks.size(); ++k) {
      const double x = left + (right - left) * (static_cast<double>(k) + 0.5) / static_cast<double>(xticks.size());
      const double w = std::min(text_width(xticks[k]), (right - left) / static_cast<double>(xticks.size()));
      xs.push_back({BBox(x - w / 2.0, bottom + 4.0, x + w / 2.0, bottom + 18.0), xticks[k],
                    ElementCategory::kXTick, xname});
    }
    auto& ys = s.y_axis_ticks[yname];
    for (std::size_t k = 0; k < yticks.size(); ++k) {
      const double y = bottom - (bottom - top) * static_cast<double>(k) / static_cast<double>(yticks.size() - 1);
      ys.push_back({BBox(left - 30.0, std::max(0.0, y - 7.0), left - 4.0, y + 7.0), yticks[k],
                    ElementCategory::kYTick, yname});
    }
    if (i == 0) {
      for (std::size_t k = 0; k < legends.size(); ++k) {
        const double y = top + 8.0 + 18.0 * static_cast<double>(k);
        if (y + 14.0 > bottom) break;
        const double w = std::min(text_width(legends[k]) + 24.0, right - left);
        s.legend_items.push_back({BBox(right - w - 6.0, y, right - 6.0, y + 14.0), legends[k],
                                  ElementCategory::kLegend, ""});
      }
    }
    map.subplots.push_back(std::move(s));
  }
  r.locations = workdir / "locations.json";
  detail::write_file_atomic(*r.locations, serialize_location_file(map));
  self_check(r, emit_locations);
  return r;
}

void write_blank_png(const fs::path& path, int width, int height) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kInvalidArgument, "PNG dimensions must be positive");
  auto be32 = [](std::string& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
  };
  auto chunk = [&](std::string& out, const char* type, const std::string& data) {
    be32(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    be32(out, static_cast<std::uint32_t>(
                  crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
  };

  std::string raw;
  raw.reserve(static_cast<std::size_t>(height) * (static_cast<std::size_t>(width) + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back('\0');  // filter: none
    raw.append(static_cast<std::size_t>(width), static_cast<char>(0xff));
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(packed_size, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size,
                reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw Error(ErrorCode::kIo, "zlib compression failed");
  }
  packed.resize(packed_size);

  std::string png("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  be32(ihdr, static_cast<std::uint32_t>(width));
  be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr += std::string("\x08\x00\x00\x00\x00", 5);  // 8-bit grayscale
  chunk(png, "IHDR", ihdr);
  chunk(png, "IDAT", packed);
  chunk(png, "IEND", "");
  detail::write_file_atomic(path, png);
}

}  // namespace chartground
