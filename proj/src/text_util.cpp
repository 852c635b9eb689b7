// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include "text_util.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "chartground/error.hpp"

namespace chartground::detail {
namespace {

bool is_fence_line(std::string_view line) {
  return trim(line).substr(0, 3) == "```";
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

}  // namespace

std::vector<FencedBlock> fenced_blocks(std::string_view text) {
  std::vector<FencedBlock> blocks;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!is_fence_line(lines[i])) continue;
    std::size_t close = i + 1;
    while (close < lines.size() && !is_fence_line(lines[close])) ++close;
    if (close >= lines.size()) break;
    FencedBlock block;
    block.language = std::string(trim(trim(lines[i]).substr(3)));
    for (std::size_t j = i + 1; j < close; ++j) {
      block.body.append(lines[j]);
      block.body.push_back('\n');
    }
    blocks.push_back(std::move(block));
    i = close;
  }
  return blocks;
}

std::size_t fence_line_count(std::string_view text) {
  std::size_t n = 0;
  for (auto line : split_lines(text)) n += is_fence_line(line) ? 1 : 0;
  return n;
}

std::vector<std::string_view> balanced_spans(std::string_view text, char open) {
  std::vector<std::string_view> spans;
  const char close = open == '[' ? ']' : '}';
  for (std::size_t start = text.find(open); start != std::string_view::npos;
       start = text.find(open, start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '[' || c == '{') {
        ++depth;
      } else if (c == ']' || c == '}') {
        if (--depth == 0) {
          if (c == close) spans.push_back(text.substr(start, i - start + 1));
          break;
        }
      }
    }
  }
  return spans;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return std::move(buf).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename onto " + path.string() + ": " + ec.message());
}

}  // namespace chartground::detail
