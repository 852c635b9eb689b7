// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chartground/geometry.hpp"

namespace testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cg-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(CHARTGROUND_FIXTURE_DIR) / name;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Random integer box inside [0, limit]^2 with positive extent.
template <typename Rng>
chartground::BBox random_int_box(Rng& rng, int limit) {
  std::uniform_int_distribution<int> d(0, limit);
  int x0 = d(rng), x1 = d(rng), y0 = d(rng), y1 = d(rng);
  while (x0 == x1) x1 = d(rng);
  while (y0 == y1) y1 = d(rng);
  return chartground::BBox(std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1));
}

// IoU by counting half-open unit cells; exact for integer boxes.
inline double pixel_iou(const chartground::BBox& a, const chartground::BBox& b) {
  const int lo_x = static_cast<int>(std::min(a.x_min(), b.x_min()));
  const int hi_x = static_cast<int>(std::max(a.x_max(), b.x_max()));
  const int lo_y = static_cast<int>(std::min(a.y_min(), b.y_min()));
  const int hi_y = static_cast<int>(std::max(a.y_max(), b.y_max()));
  long inter = 0, uni = 0;
  for (int x = lo_x; x < hi_x; ++x) {
    for (int y = lo_y; y < hi_y; ++y) {
      const bool in_a = x >= a.x_min() && x < a.x_max() && y >= a.y_min() && y < a.y_max();
      const bool in_b = x >= b.x_min() && x < b.x_max() && y >= b.y_min() && y < b.y_max();
      inter += (in_a && in_b) ? 1 : 0;
      uni += (in_a || in_b) ? 1 : 0;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Maximum one-to-one matching size among pairs with iou >= threshold, by
// exhaustive search over assignments of each gt to an unused pred or none.
inline std::size_t max_matching(const std::vector<chartground::BBox>& preds,
                                const std::vector<chartground::BBox>& gts, double threshold) {
  std::vector<std::vector<bool>> ok(gts.size(), std::vector<bool>(preds.size()));
  for (std::size_t g = 0; g < gts.size(); ++g)
    for (std::size_t p = 0; p < preds.size(); ++p) ok[g][p] = pixel_iou(preds[p], gts[g]) >= threshold;
  std::size_t best = 0;
  std::vector<bool> used(preds.size());
  auto rec = [&](auto&& self, std::size_t g, std::size_t count) -> void {
    if (g == gts.size()) {
      best = std::max(best, count);
      return;
    }
    if (count + (gts.size() - g) <= best) return;
    for (std::size_t p = 0; p < preds.size(); ++p) {
      if (!used[p] && ok[g][p]) {
        used[p] = true;
        self(self, g + 1, count + 1);
        used[p] = false;
      }
    }
    self(self, g + 1, count);
  };
  rec(rec, 0, 0);
  return best;
}

}  // namespace testing
