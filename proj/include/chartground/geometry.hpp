// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace chartground {

/// Axis-aligned rectangle in image pixels, origin at the top-left corner and
/// y growing downward. Construction enforces finite coordinates with
/// x_min < x_max and y_min < y_max, so every live BBox has positive area.
class BBox {
 public:
  /// Throws Error(kInvalidBox) when the coordinates violate the invariants.
  BBox(double x_min, double y_min, double x_max, double y_max);

  static std::optional<BBox> try_make(double x_min, double y_min, double x_max,
                                      double y_max) noexcept;

  double x_min() const noexcept { return x_min_; }
  double y_min() const noexcept { return y_min_; }
  double x_max() const noexcept { return x_max_; }
  double y_max() const noexcept { return y_max_; }
  double width() const noexcept { return x_max_ - x_min_; }
  double height() const noexcept { return y_max_ - y_min_; }
  double area() const noexcept { return width() * height(); }

  bool within(double width, double height) const noexcept {
    return x_min_ >= 0.0 && y_min_ >= 0.0 && x_max_ <= width && y_max_ <= height;
  }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  struct Unchecked {};
  BBox(Unchecked, double x_min, double y_min, double x_max, double y_max) noexcept
      : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {}

  double x_min_;
  double y_min_;
  double x_max_;
  double y_max_;
};

/// Intersection over union; 0 for disjoint boxes, exactly 1 for equal ones.
double iou(const BBox& a, const BBox& b) noexcept;

struct MatchResult {
  std::size_t matched = 0;
  double recall = 0.0;
  /// Accepted (pred index, gt index) pairs in acceptance order.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

/// One-to-one greedy matching: candidate pairs with iou >= threshold are
/// visited by IoU descending, then pred index, then gt index, and a pair is
/// kept when neither side is used yet. recall = matched / |gts|.
///
/// Throws Error(kEmptyGroundTruth) for an empty gts and
/// Error(kInvalidArgument) when threshold is outside (0, 1].
MatchResult match_and_recall(std::span<const BBox> preds, std::span<const BBox> gts,
                             double threshold);

}  // namespace chartground
