// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace chartground {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::span<const unsigned char> data);

/// 64-bit FNV-1a; used only for seed fan-out and template variant choice.
std::uint64_t fnv1a64(std::string_view data) noexcept;

/// Derives an independent stream seed from a root seed and a stable name.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream_name) noexcept;

}  // namespace chartground
