// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartground/element_map.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

#include "chartground/error.hpp"
#include "chartground/hashing.hpp"
#include "chartground/random.hpp"

namespace chartground {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kSubplotKeys[] = {"subplot_index", "title",        "x_axis_names",
                                             "y_axis_names",  "x_axis_ticks", "y_axis_ticks",
                                             "legend_items",  "other"};

[[noreturn]] void schema_error(const std::string& path, const std::string& reason) {
  throw Error(ErrorCode::kSchemaViolation, path + ": " + reason);
}

struct Parser {
  int width;
  int height;

  LabeledBox box(const json& node, const std::string& path, ElementCategory category,
                 const std::string& group) const {
    const json* coords = &node;
    std::string text;
    std::string coord_path = path;
    if (node.is_object()) {
      for (const auto& [key, value] : node.items()) {
        if (key != "bbox" && key != "text") schema_error(path, "unexpected key '" + key + "'");
      }
      if (!node.contains("bbox")) schema_error(path, "missing 'bbox'");
      coords = &node.at("bbox");
      coord_path += ".bbox";
      if (node.contains("text")) {
        if (!node.at("text").is_string()) schema_error(path + ".text", "expected a string");
        text = node.at("text").get<std::string>();
      }
    }
    if (!coords->is_array() || coords->size() != 4) {
      schema_error(coord_path, "expected [x_min, y_min, x_max, y_max]");
    }
    double v[4];
    for (std::size_t i = 0; i < 4; ++i) {
      if (!(*coords)[i].is_number()) schema_error(coord_path, "coordinates must be numbers");
      v[i] = (*coords)[i].get<double>();
    }
    auto bbox = BBox::try_make(v[0], v[1], v[2], v[3]);
    if (!bbox) schema_error(coord_path, "degenerate or non-finite box");
    if (!bbox->within(width, height)) {
      throw Error(ErrorCode::kBoxOutOfBounds,
                  coord_path + ": box exceeds the " + std::to_string(width) + "x" +
                      std::to_string(height) + " image");
    }
    return LabeledBox{*bbox, std::move(text), category, group};
  }

  std::vector<LabeledBox> box_list(const json& node, const std::string& path,
                                   ElementCategory category, const std::string& group) const {
    if (!node.is_array()) schema_error(path, "expected an array of boxes");
    std::vector<LabeledBox> out;
    for (std::size_t i = 0; i < node.size(); ++i) {
      out.push_back(box(node[i], path + "[" + std::to_string(i) + "]", category, group));
    }
    return out;
  }

  BoxGroups groups(const json& node, const std::string& path, ElementCategory category) const {
    if (!node.is_object()) schema_error(path, "expected an object of box lists");
    BoxGroups out;
    for (const auto& [key, value] : node.items()) {
      if (key.empty()) schema_error(path, "category keys must be non-empty");
      out[key] = box_list(value, path + "." + key, category, key);
    }
    return out;
  }

  SubplotElements subplot(const json& node, const std::string& path) const {
    if (!node.is_object()) schema_error(path, "expected an object");
    SubplotElements s;
    if (!node.contains("subplot_index") || !node.at("subplot_index").is_number_integer() ||
        node.at("subplot_index").get<long long>() < 0) {
      schema_error(path + ".subplot_index", "expected a non-negative integer");
    }
    s.subplot_index = node.at("subplot_index").get<int>();
    if (node.contains("title") && !node.at("title").is_null()) {
      s.title = box(node.at("title"), path + ".title", ElementCategory::kTitle, "");
    }
    if (node.contains("x_axis_names")) {
      s.x_axis_names =
          box_list(node.at("x_axis_names"), path + ".x_axis_names", ElementCategory::kXAxisName, "");
    }
    if (node.contains("y_axis_names")) {
      s.y_axis_names =
          box_list(node.at("y_axis_names"), path + ".y_axis_names", ElementCategory::kYAxisName, "");
    }
    if (node.contains("x_axis_ticks")) {
      s.x_axis_ticks = groups(node.at("x_axis_ticks"), path + ".x_axis_ticks", ElementCategory::kXTick);
    }
    if (node.contains("y_axis_ticks")) {
      s.y_axis_ticks = groups(node.at("y_axis_ticks"), path + ".y_axis_ticks", ElementCategory::kYTick);
    }
    if (node.contains("legend_items")) {
      s.legend_items =
          box_list(node.at("legend_items"), path + ".legend_items", ElementCategory::kLegend, "");
    }
    if (node.contains("other")) {
      s.other = groups(node.at("other"), path + ".other", ElementCategory::kOther);
    }
    // Extra per-subplot keys holding box lists are folded into `other`.
    for (const auto& [key, value] : node.items()) {
      if (std::find(std::begin(kSubplotKeys), std::end(kSubplotKeys), key) != std::end(kSubplotKeys)) {
        continue;
      }
      if (s.other.contains(key)) schema_error(path + "." + key, "duplicates an 'other' category");
      s.other[key] = box_list(value, path + "." + key, ElementCategory::kOther, key);
    }
    return s;
  }
};

ordered_json box_json(const LabeledBox& b) {
  ordered_json out;
  out["text"] = b.text;
  out["bbox"] = {b.box.x_min(), b.box.y_min(), b.box.x_max(), b.box.y_max()};
  return out;
}

ordered_json list_json(const std::vector<LabeledBox>& boxes) {
  ordered_json out = ordered_json::array();
  for (const auto& b : boxes) out.push_back(box_json(b));
  return out;
}

ordered_json groups_json(const BoxGroups& groups) {
  ordered_json out = ordered_json::object();
  for (const auto& [key, boxes] : groups) out[key] = list_json(boxes);
  return out;
}

}  // namespace

std::string_view category_name(ElementCategory category) {
  switch (category) {
    case ElementCategory::kTitle: return "title";
    case ElementCategory::kXAxisName: return "x_axis_name";
    case ElementCategory::kYAxisName: return "y_axis_name";
    case ElementCategory::kXTick: return "x_tick";
    case ElementCategory::kYTick: return "y_tick";
    case ElementCategory::kLegend: return "legend";
    case ElementCategory::kOther: return "other";
  }
  return "other";
}

std::optional<ElementCategory> category_from_name(std::string_view name) {
  for (auto c : {ElementCategory::kTitle, ElementCategory::kXAxisName, ElementCategory::kYAxisName,
                 ElementCategory::kXTick, ElementCategory::kYTick, ElementCategory::kLegend,
                 ElementCategory::kOther}) {
    if (category_name(c) == name) return c;
  }
  return std::nullopt;
}

std::size_t ElementLocationMap::box_count() const {
  std::size_t n = 0;
  auto count_groups = [](const BoxGroups& g) {
    std::size_t k = 0;
    for (const auto& [_, v] : g) k += v.size();
    return k;
  };
  for (const auto& s : subplots) {
    n += s.title ? 1 : 0;
    n += s.x_axis_names.size() + s.y_axis_names.size() + s.legend_items.size();
    n += count_groups(s.x_axis_ticks) + count_groups(s.y_axis_ticks) + count_groups(s.other);
  }
  return n;
}

ElementLocationMap parse_location_file(std::string_view raw) {
  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedJson, e.what());
  }
  if (!doc.is_object()) schema_error("$", "expected an object");

  ElementLocationMap map;
  if (!doc.contains("image_id") || !doc.at("image_id").is_string()) {
    schema_error("$.image_id", "expected a string");
  }
  map.image_id = doc.at("image_id").get<std::string>();
  for (const char* key : {"image_width", "image_height"}) {
    if (!doc.contains(key) || !doc.at(key).is_number_integer() || doc.at(key).get<long long>() <= 0 ||
        doc.at(key).get<long long>() > 1'000'000) {
      schema_error(std::string("$.") + key, "expected a positive integer");
    }
  }
  map.image_width = doc.at("image_width").get<int>();
  map.image_height = doc.at("image_height").get<int>();
  if (!doc.contains("subplots") || !doc.at("subplots").is_array()) {
    schema_error("$.subplots", "expected an array");
  }

  const Parser parser{map.image_width, map.image_height};
  std::set<int> seen;
  const auto& subplots = doc.at("subplots");
  for (std::size_t i = 0; i < subplots.size(); ++i) {
    const std::string path = "$.subplots[" + std::to_string(i) + "]";
    auto s = parser.subplot(subplots[i], path);
    if (!seen.insert(s.subplot_index).second) {
      schema_error(path + ".subplot_index", "duplicate subplot index");
    }
    map.subplots.push_back(std::move(s));
  }

  for (const auto& [key, value] : doc.items()) {
    if (key == "image_id" || key == "image_width" || key == "image_height" || key == "subplots") {
      continue;
    }
    if (key == "other" && value.is_object()) {
      for (const auto& [k, v] : value.items()) map.other[k] = v.dump();
      continue;
    }
    map.other[key] = value.dump();
  }
  return map;
}

std::string serialize_location_file(const ElementLocationMap& map) {
  ordered_json doc;
  doc["image_id"] = map.image_id;
  doc["image_width"] = map.image_width;
  doc["image_height"] = map.image_height;
  ordered_json subplots = ordered_json::array();
  for (const auto& s : map.subplots) {
    ordered_json node;
    node["subplot_index"] = s.subplot_index;
    node["title"] = s.title ? box_json(*s.title) : ordered_json(nullptr);
    node["x_axis_names"] = list_json(s.x_axis_names);
    node["y_axis_names"] = list_json(s.y_axis_names);
    node["x_axis_ticks"] = groups_json(s.x_axis_ticks);
    node["y_axis_ticks"] = groups_json(s.y_axis_ticks);
    node["legend_items"] = list_json(s.legend_items);
    node["other"] = groups_json(s.other);
    subplots.push_back(std::move(node));
  }
  doc["subplots"] = std::move(subplots);
  if (!map.other.empty()) {
    ordered_json other = ordered_json::object();
    for (const auto& [key, text] : map.other) other[key] = ordered_json::parse(text);
    doc["other"] = std::move(other);
  }
  return doc.dump();
}

std::vector<SampledElement> sample_elements(const ElementLocationMap& map, int per_category,
                                            std::uint64_t seed) {
  if (per_category < 1) throw Error(ErrorCode::kInvalidArgument, "per_category must be >= 1");

  // Pool elements per category key, in map order.
  std::map<std::pair<int, std::string>, std::vector<SampledElement>> pools;
  auto add = [&](ElementCategory c, const std::string& other_key, int subplot, const LabeledBox& b) {
    pools[{static_cast<int>(c), other_key}].push_back(SampledElement{subplot, b});
  };
  for (const auto& s : map.subplots) {
    if (s.title) add(ElementCategory::kTitle, "", s.subplot_index, *s.title);
    for (const auto& b : s.x_axis_names) add(ElementCategory::kXAxisName, "", s.subplot_index, b);
    for (const auto& b : s.y_axis_names) add(ElementCategory::kYAxisName, "", s.subplot_index, b);
    for (const auto& [_, v] : s.x_axis_ticks)
      for (const auto& b : v) add(ElementCategory::kXTick, "", s.subplot_index, b);
    for (const auto& [_, v] : s.y_axis_ticks)
      for (const auto& b : v) add(ElementCategory::kYTick, "", s.subplot_index, b);
    for (const auto& b : s.legend_items) add(ElementCategory::kLegend, "", s.subplot_index, b);
    for (const auto& [key, v] : s.other)
      for (const auto& b : v) add(ElementCategory::kOther, key, s.subplot_index, b);
  }

  std::vector<SampledElement> out;
  for (auto& [key, pool] : pools) {
    const std::string stream =
        std::string(category_name(static_cast<ElementCategory>(key.first))) + "/" + key.second;
    Rng rng(derive_seed(seed, stream));
    const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(per_category));
    // Partial Fisher-Yates: positions [0, i) hold the draws in order.
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + uniform_index(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  }
  return out;
}

}  // namespace chartground
