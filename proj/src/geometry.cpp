// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartground/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "chartground/error.hpp"

namespace chartground {

std::optional<BBox> BBox::try_make(double x_min, double y_min, double x_max,
                                   double y_max) noexcept {
  if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
      !std::isfinite(y_max)) {
    return std::nullopt;
  }
  if (!(x_min < x_max) || !(y_min < y_max)) return std::nullopt;
  return BBox(Unchecked{}, x_min, y_min, x_max, y_max);
}

BBox::BBox(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  if (!try_make(x_min, y_min, x_max, y_max)) {
    throw Error(ErrorCode::kInvalidBox,
                "box [" + std::to_string(x_min) + ", " + std::to_string(y_min) + ", " +
                    std::to_string(x_max) + ", " + std::to_string(y_max) +
                    "] needs finite coordinates with min < max");
  }
}

double iou(const BBox& a, const BBox& b) noexcept {
  const double iw = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double ih = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

MatchResult match_and_recall(std::span<const BBox> preds, std::span<const BBox> gts,
                             double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "IoU threshold must lie in (0, 1]");
  }
  if (gts.empty()) throw Error(ErrorCode::kEmptyGroundTruth, "no ground-truth boxes");

  struct Candidate {
    double overlap;
    std::size_t pred;
    std::size_t gt;
  };
  std::vector<Candidate> candidates;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = iou(preds[p], gts[g]);
      if (v >= threshold) candidates.push_back({v, p, g});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& l, const Candidate& r) {
    if (l.overlap != r.overlap) return l.overlap > r.overlap;
    if (l.pred != r.pred) return l.pred < r.pred;
    return l.gt < r.gt;
  });

  MatchResult result;
  std::vector<bool> pred_used(preds.size(), false);
  std::vector<bool> gt_used(gts.size(), false);
  for (const auto& c : candidates) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = true;
    gt_used[c.gt] = true;
    result.pairs.emplace_back(c.pred, c.gt);
  }
  result.matched = result.pairs.size();
  result.recall = static_cast<double>(result.matched) / static_cast<double>(gts.size());
  return result;
}

}  // namespace chartground
