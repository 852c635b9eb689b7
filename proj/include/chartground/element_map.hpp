// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chartground/geometry.hpp"

namespace chartground {

// Declaration order is the sampling and output order.
enum class ElementCategory { kTitle, kXAxisName, kYAxisName, kXTick, kYTick, kLegend, kOther };

std::string_view category_name(ElementCategory category);
std::optional<ElementCategory> category_from_name(std::string_view name);

struct LabeledBox {
  BBox box;
  std::string text;
  ElementCategory category = ElementCategory::kOther;
  /// Axis name for ticks, free-form key for kOther, empty otherwise. Not
  /// serialized with the box; the container key carries it.
  std::string group;

  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

using BoxGroups = std::map<std::string, std::vector<LabeledBox>>;

struct SubplotElements {
  int subplot_index = 0;
  std::optional<LabeledBox> title;
  std::vector<LabeledBox> x_axis_names;
  std::vector<LabeledBox> y_axis_names;
  BoxGroups x_axis_ticks;  // keyed by axis label, "x-axis" when unlabeled
  BoxGroups y_axis_ticks;  // keyed by axis label, "y-axis" when unlabeled
  std::vector<LabeledBox> legend_items;
  BoxGroups other;

  friend bool operator==(const SubplotElements&, const SubplotElements&) = default;
};

/// Element locations for one rendered chart, already in image coordinates.
struct ElementLocationMap {
  std::string image_id;
  int image_width = 0;
  int image_height = 0;
  std::vector<SubplotElements> subplots;
  /// Unknown top-level keys, kept verbatim as serialized JSON text.
  std::map<std::string, std::string> other;

  std::size_t box_count() const;

  friend bool operator==(const ElementLocationMap&, const ElementLocationMap&) = default;
};

/// Parses and validates a location file. Errors: kMalformedJson,
/// kSchemaViolation (message starts with the JSON path), kBoxOutOfBounds.
ElementLocationMap parse_location_file(std::string_view raw);

/// Canonical serialization; keys in schema order, boxes as
/// {"text": ..., "bbox": [x_min, y_min, x_max, y_max]}.
std::string serialize_location_file(const ElementLocationMap& map);

struct SampledElement {
  int subplot_index = 0;
  LabeledBox element;

  friend bool operator==(const SampledElement&, const SampledElement&) = default;
};

/// Draws min(per_category, available) elements per category uniformly
/// without replacement. Output is grouped by category (enum order, `other`
/// keys sorted) and keeps draw order within a category.
std::vector<SampledElement> sample_elements(const ElementLocationMap& map, int per_category,
                                            std::uint64_t seed);

}  // namespace chartground
