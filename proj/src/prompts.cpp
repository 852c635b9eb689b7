// Copyright (c) 2026, The chartground Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartground/prompts.hpp"

#include "chartground/hashing.hpp"

namespace chartground::prompts {
namespace {

constexpr std::string_view kChartFilterText =
    "You are shown one figure extracted from a scientific paper. Decide whether it is a data "
    "chart: a plot that encodes data with axes, marks or a legend (bar, line, scatter, pie, "
    "histogram, heatmap, box plot and similar). Photographs, diagrams, flowcharts, tables, "
    "equations and illustrations are not charts.\n"
    "Reply with exactly one word: chart or non-chart.";

constexpr std::string_view kDistortionFilterText =
    "The first image is an original chart. The second image was rendered from plotting code "
    "transcribed from the first. Compare chart type, data values, axis ranges, text and subplot "
    "layout.\n"
    "Reply with exactly one word: faithful if the second image reproduces the first, distorted "
    "otherwise.";

constexpr std::string_view kChartToCodeText =
    "Convert this chart into a self-contained Python script that uses matplotlib (and numpy if "
    "needed) to reproduce it as closely as possible: the same chart type, data values, axis "
    "ranges and scales, title, axis labels, tick labels, legend entries, colors and subplot "
    "layout. Do not call plt.show() or plt.savefig(); the caller saves the figure.\n"
    "Return the script in a single ```python fenced code block.";

constexpr std::string_view kEvolveText =
    "Rewrite the matplotlib script below so that, besides drawing exactly the same figure, it "
    "records the pixel bounding box of every chart element and writes them to locations.json, "
    "following the structure and helper functions of the examples. For each subplot record the "
    "title, the x and y axis labels, every visible tick label keyed by its axis label ('x-axis' or "
    "'y-axis' when the axis is unlabeled) and the legend entries. Boxes are [x_min, y_min, x_max, "
    "y_max] in image pixels, origin at the top-left corner. Do not change what is drawn.\n"
    "Return the complete script in a single ```python fenced code block.";

constexpr std::string_view kEvolveRepairText =
    "Your previous rewrite failed when it was executed. Fix it so that it runs, draws the same "
    "figure and writes a valid locations.json. The error output is shown below.";

constexpr std::string_view kQaGenerateText =
    "Write ten question-answer pairs about this chart. The plotting code that produced it is "
    "given as ground truth for the data. Mix question types: reading a single value or label "
    "(scope local) and comparisons, trends, extrema or arithmetic over several elements (scope "
    "global). Every question must be answerable from the image alone; answers are a number, a "
    "word or a short phrase.\n"
    "Output only a JSON array of ten objects with the keys \"question\", \"answer\" and "
    "\"scope\" (\"global\" or \"local\").\n"
    "Example: [{\"question\": \"Which year has the highest revenue?\", \"answer\": \"2021\", "
    "\"scope\": \"global\"}, {\"question\": \"What is the label of the y-axis?\", \"answer\": "
    "\"Revenue (M$)\", \"scope\": \"local\"}]";

constexpr std::string_view kVerifyText =
    "Check each candidate question-answer pair about this chart. For every candidate decide:\n"
    "- groundable: the question only refers to elements that exist in the chart;\n"
    "- answerable: a careful reader can answer it from the image (no precise counting of "
    "hundreds of marks, no data hidden from view);\n"
    "- correct: the given answer is right, using the plotting code as the source of truth.\n"
    "Output only a JSON array with one object per candidate, in the same order, each with the "
    "boolean keys \"groundable\", \"answerable\" and \"correct\".";

constexpr std::string_view kJudgeText =
    "You grade generated matplotlib code against reference code for the same chart. Score each "
    "aspect from 0 (completely wrong) to 5 (identical): data, plot type structure, axes scales "
    "and limits, text elements, styling.\n"
    "Reply with only a JSON object: {\"data\": n, \"plot type structure\": n, \"axes scales and "
    "limits\": n, \"text elements\": n, \"styling\": n}.";

constexpr std::string_view kDifficultyProbeText =
    "Answer the question about the chart. Reason step by step inside <think></think>, then give "
    "the final answer inside <answer></answer>. Locations are answered as [x_min, y_min, x_max, "
    "y_max] in image pixels; code is answered as one ```python fenced block.";

ModelRequest base(Purpose purpose, std::string_view template_id) {
  ModelRequest r;
  r.purpose = purpose;
  r.template_id = std::string(template_id);
  return r;
}

std::string fenced(std::string_view lang, std::string_view body) {
  std::string out = "```";
  out += lang;
  out += "\n";
  out += body;
  if (body.empty() || body.back() != '\n') out += "\n";
  out += "```";
  return out;
}

std::string with_examples(std::string_view script, const std::vector<std::string>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    out += "Example " + std::to_string(i + 1) + ":\n" + fenced("python", seeds[i]) + "\n\n";
  }
  out += "Script to evolve:\n" + fenced("python", script);
  return out;
}

}  // namespace

std::map<std::string, std::string> prompt_hashes() {
  return {
      {std::string(kChartFilter), sha256_hex(kChartFilterText)},
      {std::string(kDistortionFilter), sha256_hex(kDistortionFilterText)},
      {std::string(kChartToCode), sha256_hex(kChartToCodeText)},
      {std::string(kEvolve), sha256_hex(kEvolveText)},
      {std::string(kEvolveRepair), sha256_hex(kEvolveRepairText)},
      {std::string(kQaGenerate), sha256_hex(kQaGenerateText)},
      {std::string(kVerify), sha256_hex(kVerifyText)},
      {std::string(kJudge), sha256_hex(kJudgeText)},
      {std::string(kDifficultyProbe), sha256_hex(kDifficultyProbeText)},
  };
}

ModelRequest chart_filter(const std::filesystem::path& image) {
  auto r = base(Purpose::kFilter, kChartFilter);
  r.messages.push_back({"user", std::string(kChartFilterText), image});
  r.max_output_tokens = 8;
  return r;
}

ModelRequest distortion_filter(const std::filesystem::path& original,
                               const std::filesystem::path& reproduced) {
  auto r = base(Purpose::kFilter, kDistortionFilter);
  r.messages.push_back({"user", "Original chart:", original});
  r.messages.push_back({"user", "Reproduced chart:", reproduced});
  r.messages.push_back({"user", std::string(kDistortionFilterText), std::nullopt});
  r.max_output_tokens = 8;
  return r;
}

ModelRequest chart_to_code(const std::filesystem::path& image) {
  auto r = base(Purpose::kChartToCode, kChartToCode);
  r.messages.push_back({"user", std::string(kChartToCodeText), image});
  r.max_output_tokens = 4096;
  return r;
}

ModelRequest evolve(std::string_view script, const std::vector<std::string>& seed_examples) {
  auto r = base(Purpose::kEvolve, kEvolve);
  r.messages.push_back({"system", std::string(kEvolveText), std::nullopt});
  r.messages.push_back({"user", with_examples(script, seed_examples), std::nullopt});
  r.max_output_tokens = 8192;
  return r;
}

ModelRequest evolve_repair(std::string_view script, const std::vector<std::string>& seed_examples,
                           std::string_view failed_script, std::string_view error_text) {
  auto r = base(Purpose::kEvolve, kEvolveRepair);
  r.messages.push_back({"system", std::string(kEvolveText), std::nullopt});
  r.messages.push_back({"user", with_examples(script, seed_examples), std::nullopt});
  r.messages.push_back({"assistant", fenced("python", failed_script), std::nullopt});
  r.messages.push_back(
      {"user", std::string(kEvolveRepairText) + "\n" + fenced("", error_text), std::nullopt});
  r.max_output_tokens = 8192;
  return r;
}

ModelRequest qa_generate(const std::filesystem::path& image, std::string_view script) {
  auto r = base(Purpose::kQaGenerate, kQaGenerate);
  r.messages.push_back({"system", std::string(kQaGenerateText), std::nullopt});
  r.messages.push_back({"user", "Plotting code:\n" + fenced("python", script), image});
  r.temperature = 0.7;
  return r;
}

ModelRequest verify(const std::filesystem::path& image, std::string_view script,
                    std::string_view candidates_json) {
  auto r = base(Purpose::kVerify, kVerify);
  r.messages.push_back({"system", std::string(kVerifyText), std::nullopt});
  r.messages.push_back({"user",
                        "Plotting code:\n" + fenced("python", script) + "\n\nCandidates:\n" +
                            fenced("json", candidates_json),
                        image});
  return r;
}

ModelRequest judge(std::string_view candidate, std::string_view reference) {
  auto r = base(Purpose::kJudge, kJudge);
  r.messages.push_back({"system", std::string(kJudgeText), std::nullopt});
  r.messages.push_back({"user",
                        "Reference code:\n" + fenced("python", reference) +
                            "\n\nGenerated code:\n" + fenced("python", candidate),
                        std::nullopt});
  r.max_output_tokens = 256;
  return r;
}

ModelRequest difficulty_probe(const std::filesystem::path& image, std::string_view question,
                              std::string_view task_hint, int sample_index) {
  auto r = base(Purpose::kDifficultyProbe, kDifficultyProbe);
  r.messages.push_back({"system", std::string(kDifficultyProbeText), std::nullopt});
  r.messages.push_back({"user", "Task: " + std::string(task_hint) + "\n" + std::string(question), image});
  r.temperature = 1.0;
  r.sample_index = sample_index;
  return r;
}

}  // namespace chartground::prompts
