#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "videomind/plan.hpp"

namespace videomind {

struct PromptSlots {
    std::optional<std::string> question;
    std::optional<std::string> query;
    std::optional<double> duration;
    std::optional<std::string> subtitles;
    std::optional<std::vector<std::string>> options;
};

inline constexpr std::size_t kMaxSubtitleLines = 100;

/// Fills the role's instruction template. Throws TemplateError when a slot
/// the template needs is absent or empty:
///   planner  - question
///   grounder - query
///   verifier - query
///   answerer - question and duration; subtitles and options are optional
///              blocks, subtitles cut to the first 100 lines.
std::string render_prompt(Role role, const PromptSlots& slots);

/// Template used to generate question -> query rephrasing data offline.
std::string render_rephrase_prompt(const std::string& question);

/// Keeps the first max_lines lines of a subtitle block.
std::string truncate_lines(const std::string& text, std::size_t max_lines = kMaxSubtitleLines);

/// Shortest decimal form that reads back to the same double.
std::string format_seconds(double seconds);

}  // namespace videomind
