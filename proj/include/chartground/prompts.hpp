// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "chartground/model_client.hpp"

namespace chartground::prompts {

inline constexpr std::string_view kPromptSetVersion = "v1";

/// Template identifiers, also used as keys in the stub responder.
inline constexpr std::string_view kChartFilter = "filter.chart/v1";
inline constexpr std::string_view kDistortionFilter = "filter.distortion/v1";
inline constexpr std::string_view kChartToCode = "chart_to_code/v1";
inline constexpr std::string_view kEvolve = "evolve/v1";
inline constexpr std::string_view kEvolveRepair = "evolve.repair/v1";
inline constexpr std::string_view kQaGenerate = "qa_generate/v1";
inline constexpr std::string_view kVerify = "verify/v1";
inline constexpr std::string_view kJudge = "judge/v1";
inline constexpr std::string_view kDifficultyProbe = "difficulty_probe/v1";

/// SHA-256 of every template text, keyed by identifier; recorded in
/// provenance so a dataset names the exact prompts that built it.
std::map<std::string, std::string> prompt_hashes();

ModelRequest chart_filter(const std::filesystem::path& image);
ModelRequest distortion_filter(const std::filesystem::path& original,
                               const std::filesystem::path& reproduced);
ModelRequest chart_to_code(const std::filesystem::path& image);
ModelRequest evolve(std::string_view script, const std::vector<std::string>& seed_examples);
ModelRequest evolve_repair(std::string_view script, const std::vector<std::string>& seed_examples,
                           std::string_view failed_script, std::string_view error_text);
ModelRequest qa_generate(const std::filesystem::path& image, std::string_view script);
ModelRequest verify(const std::filesystem::path& image, std::string_view script,
                    std::string_view candidates_json);
ModelRequest judge(std::string_view candidate, std::string_view reference);
ModelRequest difficulty_probe(const std::filesystem::path& image, std::string_view question,
                              std::string_view task_hint, int sample_index);

}  // namespace chartground::prompts
