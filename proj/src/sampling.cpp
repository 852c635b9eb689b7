// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartground/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "chartground/error.hpp"
#include "chartground/random.hpp"

namespace chartground {

std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights,
                                                             std::size_t count,
                                                             std::uint64_t seed) {
  if (count > weights.size()) {
    throw Error(ErrorCode::kInsufficientRecords,
                "requested " + std::to_string(count) + " of " + std::to_string(weights.size()));
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kInvalidArgument, "sampling weights must be positive and finite");
    }
  }
  Rng rng(seed);
  std::vector<double> keys(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    // u in (0, 1]; key = log(u) / w, larger keys win.
    const double u = 1.0 - uniform_unit(rng);
    keys[i] = std::log(u) / weights[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] > keys[b]; });
  order.resize(count);
  return order;
}

}  // namespace chartground
