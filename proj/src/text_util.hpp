// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cctype>
#include <charconv>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chartground::detail {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

struct FencedBlock {
  std::string language;
  std::string body;
};

/// Markdown code fences: a line starting with ``` opens, the next line
/// starting with ``` closes. An unclosed fence is ignored.
std::vector<FencedBlock> fenced_blocks(std::string_view text);

/// Number of fence lines (opening or closing) in `text`.
std::size_t fence_line_count(std::string_view text);

/// Every balanced span starting with `open` ('[' or '{') and closed by its
/// partner, honoring string literals, in order of start position.
std::vector<std::string_view> balanced_spans(std::string_view text, char open);

std::string read_file(const std::filesystem::path& path);
/// Write to a sibling temp file, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace chartground::detail
