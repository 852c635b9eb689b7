// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartground/dataset_stats.hpp"

#include <json.hpp>

#include <set>
#include <sstream>

namespace chartground {

DatasetStats dataset_stats(const std::vector<DatasetRecord>& records) {
  DatasetStats s;
  std::set<std::string> images;
  std::map<std::string, std::size_t> subplots_by_source;
  for (const auto& r : records) {
    ++s.records;
    ++s.per_task[std::string(task_name(r.task))];
    ++s.per_split[std::string(split_name(r.split))];
    if (r.task == TaskKind::kQa && r.reasoning_scope) ++s.per_scope[std::string(scope_name(*r.reasoning_scope))];
    images.insert(r.image_ref);
    auto sp = r.provenance.find("subplot_count");
    if (sp == r.provenance.end()) continue;
    auto src = r.provenance.find("source_image");
    const std::string key = src != r.provenance.end() ? src->second : r.image_ref;
    try {
      subplots_by_source[key] = std::stoul(sp->second);
    } catch (const std::exception&) {
      // malformed count: ignore
    }
  }
  s.images = images.size();
  for (const auto& [_, n] : subplots_by_source) ++s.subplot_histogram[n];
  return s;
}

std::string stats_to_json(const DatasetStats& s) {
  nlohmann::ordered_json doc;
  doc["records"] = s.records;
  doc["images"] = s.images;
  doc["per_task"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : s.per_task) doc["per_task"][k] = v;
  doc["per_split"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : s.per_split) doc["per_split"][k] = v;
  doc["per_scope"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : s.per_scope) doc["per_scope"][k] = v;
  doc["subplot_histogram"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : s.subplot_histogram) doc["subplot_histogram"][std::to_string(k)] = v;
  return doc.dump(2) + "\n";
}

std::string stats_to_table(const DatasetStats& s) {
  std::ostringstream os;
  os << "records  " << s.records << "\nimages   " << s.images << "\n";
  auto section = [&](const char* title, const auto& m) {
    if (m.empty()) return;
    os << title << "\n";
    for (const auto& [k, v] : m) os << "  " << k << "  " << v << "\n";
  };
  section("task", s.per_task);
  section("split", s.per_split);
  section("scope", s.per_scope);
  section("subplots", s.subplot_histogram);
  return os.str();
}

}  // namespace chartground
