#include "stepopsd/step_extractor.hpp"

#include <algorithm>

#include "stepopsd/errors.hpp"

namespace stepopsd {

namespace {

bool contains(const std::vector<std::string>& names, std::string_view name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::optional<std::string> delimiter_name(std::string_view text, bool closing,
                                          const std::vector<std::string>& tags) {
  const std::string_view prefix = closing ? "</" : "<";
  if (text.size() < prefix.size() + 2 || text.substr(0, prefix.size()) != prefix ||
      text.back() != '>') {
    return std::nullopt;
  }
  const auto name = text.substr(prefix.size(), text.size() - prefix.size() - 1);
  if (!closing && !name.empty() && name.front() == '/') return std::nullopt;
  if (!contains(tags, name)) return std::nullopt;
  return std::string(name);
}

StepSegment make_segment(std::size_t step_index, std::size_t begin, std::size_t end,
                         const std::vector<bool>& included) {
  StepSegment seg{step_index, Span(begin, end), {}};
  seg.included_mask.assign(included.begin() + static_cast<std::ptrdiff_t>(begin),
                           included.begin() + static_cast<std::ptrdiff_t>(end));
  return seg;
}

}  // namespace

std::string_view extraction_mode_name(ExtractionMode mode) {
  return mode == ExtractionMode::kActionOnly ? "action_only" : "clean_step_no_observation";
}

std::optional<ExtractionMode> parse_extraction_mode(std::string_view name) {
  if (name == "action_only") return ExtractionMode::kActionOnly;
  if (name == "clean_step_no_observation") return ExtractionMode::kCleanStepNoObservation;
  return std::nullopt;
}

std::optional<std::string> TagGrammar::open_tag(std::string_view text) const {
  return delimiter_name(text, false, tags);
}

std::optional<std::string> TagGrammar::close_tag(std::string_view text) const {
  return delimiter_name(text, true, tags);
}

bool TagGrammar::is_environment_delimiter(std::string_view text) const {
  auto name = open_tag(text);
  if (!name) name = close_tag(text);
  return name && contains(environment_tags, *name);
}

std::size_t StepSegment::included_count() const {
  return static_cast<std::size_t>(std::count(included_mask.begin(), included_mask.end(), true));
}

std::vector<TagBlock> scan_tags(const Trajectory& traj, const TagGrammar& grammar) {
  std::vector<TagBlock> blocks;
  std::optional<TagBlock> open;
  for (std::size_t i = 0; i < traj.tokens.size(); ++i) {
    const auto& text = traj.tokens[i].text;
    if (auto name = grammar.open_tag(text)) {
      if (open) {
        const std::string kind = *name == open->name ? "nested same-name tag <" : "nested tag <";
        throw ParseError(kind + *name + "> at token " + std::to_string(i) + " inside <" +
                             open->name + "> opened at token " + std::to_string(open->open),
                         i);
      }
      open = TagBlock{*name, i, 0};
    } else if (auto cname = grammar.close_tag(text)) {
      if (!open) {
        throw ParseError("closing tag </" + *cname + "> at token " + std::to_string(i) +
                             " has no opener",
                         i);
      }
      if (*cname != open->name) {
        throw ParseError("unbalanced tag <" + open->name + "> opened at token " +
                             std::to_string(open->open) + " closed by </" + *cname + ">",
                         open->open);
      }
      open->close = i;
      blocks.push_back(*open);
      open.reset();
    }
  }
  if (open) {
    throw ParseError("unbalanced tag <" + open->name + "> opened at token " +
                         std::to_string(open->open) + " is never closed",
                     open->open);
  }
  return blocks;
}

bool is_policy_generated(const TokenRecord& token, const TagGrammar& grammar) {
  if (token.role == Role::kObservation) return false;
  if (token.role == Role::kStructural && grammar.is_environment_delimiter(token.text)) return false;
  return true;
}

std::vector<StepSegment> extract_steps(const Trajectory& traj, ExtractionMode mode,
                                       const TagGrammar& grammar) {
  const auto blocks = scan_tags(traj, grammar);
  std::vector<StepSegment> segments;

  if (mode == ExtractionMode::kActionOnly) {
    std::vector<bool> included(traj.tokens.size());
    for (std::size_t i = 0; i < traj.tokens.size(); ++i) {
      included[i] = traj.tokens[i].role == Role::kAction;
    }
    for (const auto& block : blocks) {
      const std::size_t begin = block.open + 1;
      const std::size_t end = block.close;
      if (begin >= end) continue;
      const bool any = std::any_of(included.begin() + static_cast<std::ptrdiff_t>(begin),
                                   included.begin() + static_cast<std::ptrdiff_t>(end),
                                   [](bool b) { return b; });
      if (any) segments.push_back(make_segment(segments.size(), begin, end, included));
    }
    return segments;
  }

  // One step per turn: the tight span around the turn's policy tokens.
  std::vector<bool> included(traj.tokens.size());
  for (std::size_t i = 0; i < traj.tokens.size(); ++i) {
    included[i] = is_policy_generated(traj.tokens[i], grammar);
  }
  std::size_t run_begin = 0;
  while (run_begin < traj.tokens.size()) {
    std::size_t run_end = run_begin;
    while (run_end < traj.tokens.size() && traj.tokens[run_end].turn == traj.tokens[run_begin].turn) {
      ++run_end;
    }
    std::optional<std::size_t> first;
    std::size_t last = 0;
    for (std::size_t i = run_begin; i < run_end; ++i) {
      if (included[i]) {
        if (!first) first = i;
        last = i;
      }
    }
    if (first) segments.push_back(make_segment(segments.size(), *first, last + 1, included));
    run_begin = run_end;
  }
  return segments;
}

std::vector<bool> mask_observations(const Trajectory& traj) {
  std::vector<bool> mask(traj.tokens.size());
  for (std::size_t i = 0; i < traj.tokens.size(); ++i) {
    mask[i] = traj.tokens[i].role != Role::kObservation;
  }
  return mask;
}

}  // namespace stepopsd
