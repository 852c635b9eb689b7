// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "chartground/annotation.hpp"

namespace chartground {

/// Dataset composition summary.
struct DatasetStats {
  std::size_t records = 0;
  std::map<std::string, std::size_t> per_task;
  std::map<std::string, std::size_t> per_split;
  std::map<std::string, std::size_t> per_scope;  // qa records only
  std::size_t images = 0;                         // distinct image_ref values
  /// Subplot count -> distinct source charts, from the "subplot_count"
  /// provenance field.
  std::map<std::size_t, std::size_t> subplot_histogram;
};

DatasetStats dataset_stats(const std::vector<DatasetRecord>& records);
std::string stats_to_json(const DatasetStats& stats);
std::string stats_to_table(const DatasetStats& stats);

}  // namespace chartground
