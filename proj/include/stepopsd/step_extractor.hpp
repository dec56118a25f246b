#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stepopsd/trajectory.hpp"

namespace stepopsd {

enum class ExtractionMode { kActionOnly, kCleanStepNoObservation };

std::string_view extraction_mode_name(ExtractionMode mode);
std::optional<ExtractionMode> parse_extraction_mode(std::string_view name);

// Closed, flat tag grammar. Delimiters are single tokens of the form
// `<name>` / `</name>`. Tags listed in `environment_tags` wrap
// environment-produced text; their delimiters are not policy output.
struct TagGrammar {
  std::vector<std::string> tags{"action", "think", "search", "information", "answer", "obs"};
  std::vector<std::string> environment_tags{"obs", "information"};

  // Tag name when `text` is an open (or close) delimiter of a known tag.
  std::optional<std::string> open_tag(std::string_view text) const;
  std::optional<std::string> close_tag(std::string_view text) const;
  bool is_environment_delimiter(std::string_view text) const;
};

struct StepSegment {
  std::size_t step_index = 0;
  Span span{0, 1};
  std::vector<bool> included_mask;  // one entry per token in span

  std::size_t included_count() const;
  bool operator==(const StepSegment&) const = default;
};

// A tag block [open, close] found by the scanner.
struct TagBlock {
  std::string name;
  std::size_t open = 0;
  std::size_t close = 0;
};

// Single-pass flat scanner. Throws ParseError (byte offset = token index) on
// unbalanced, mismatched or nested delimiters.
std::vector<TagBlock> scan_tags(const Trajectory& traj, const TagGrammar& grammar = {});

bool is_policy_generated(const TokenRecord& token, const TagGrammar& grammar = {});

std::vector<StepSegment> extract_steps(const Trajectory& traj, ExtractionMode mode,
                                       const TagGrammar& grammar = {});

// True exactly for tokens whose role is not observation.
std::vector<bool> mask_observations(const Trajectory& traj);

}  // namespace stepopsd
