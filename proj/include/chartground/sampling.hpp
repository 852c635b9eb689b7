// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace chartground {

/// Weighted sampling without replacement (successive-draw semantics: each
/// pick is proportional to weight among the items still available). Uses
/// exponential keys log(u) / w and keeps the `count` largest. Returned in
/// selection order. Weights must be positive and finite.
std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights,
                                                             std::size_t count,
                                                             std::uint64_t seed);

}  // namespace chartground
