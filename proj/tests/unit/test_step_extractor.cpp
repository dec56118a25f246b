#include <doctest.h>

#include "oracles.hpp"
#include "stepopsd/errors.hpp"
#include "stepopsd/step_extractor.hpp"

using namespace stepopsd;

namespace {

Trajectory from_text(const std::vector<std::pair<std::string, Role>>& toks) {
  Trajectory t;
  t.id = "x";
  int turn = 0;
  for (const auto& [text, role] : toks) {
    if (text == "<action>") ++turn;
    t.tokens.push_back({text, role, role == Role::kObservation ? 0.0 : -0.5, turn});
  }
  return t;
}

const auto S = Role::kStructural;
const auto A = Role::kAction;
const auto O = Role::kObservation;

Trajectory go_north() {
  return from_text({{"<action>", S}, {"go", A}, {"north", A}, {"</action>", S},
                    {"<obs>", S}, {"wall", O}, {"</obs>", S},
                    {"<action>", S}, {"take", A}, {"key", A}, {"</action>", S}});
}

std::vector<std::string> included_texts(const Trajectory& t, const StepSegment& s) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < s.span.length(); ++j) {
    if (s.included_mask[j]) out.push_back(t.tokens[s.span.start() + j].text);
  }
  return out;
}

}  // namespace

TEST_CASE("action_only extracts exactly the action words") {
  const auto t = go_north();
  const auto segs = extract_steps(t, ExtractionMode::kActionOnly);
  REQUIRE(segs.size() == 2);
  CHECK(included_texts(t, segs[0]) == std::vector<std::string>{"go", "north"});
  CHECK(included_texts(t, segs[1]) == std::vector<std::string>{"take", "key"});
  CHECK(segs[0].step_index == 0);
  CHECK(segs[1].step_index == 1);
}

TEST_CASE("clean_step_no_observation keeps observations out of every mask") {
  const auto t = go_north();
  const auto segs = extract_steps(t, ExtractionMode::kCleanStepNoObservation);
  REQUIRE(segs.size() == 2);
  for (const auto& s : segs) {
    for (const auto& w : included_texts(t, s)) CHECK(w != "wall");
  }
  CHECK(included_texts(t, segs[0]) == std::vector<std::string>{"<action>", "go", "north", "</action>"});
}

TEST_CASE("no action tags yields no segments in action_only") {
  const auto t = from_text({{"<obs>", S}, {"hello", O}, {"</obs>", S}});
  CHECK(extract_steps(t, ExtractionMode::kActionOnly).empty());
}

TEST_CASE("unbalanced tags report the opener's token index") {
  const auto t = from_text({{"<obs>", S}, {"x", O}, {"</obs>", S}, {"<action>", S}, {"go", A}});
  try {
    extract_steps(t, ExtractionMode::kActionOnly);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.byte_offset() == 3);
  }
  const auto mismatched = from_text({{"<action>", S}, {"go", A}, {"</obs>", S}});
  try {
    scan_tags(mismatched);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.byte_offset() == 0);
  }
}

TEST_CASE("nested same-name tags are rejected") {
  const auto t = from_text({{"<action>", S}, {"<action>", S}, {"go", A}, {"</action>", S}, {"</action>", S}});
  try {
    extract_steps(t, ExtractionMode::kActionOnly);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("nested same-name") != std::string::npos);
  }
}

TEST_CASE("mask_observations is role != observation") {
  const auto all_obs = from_text({{"a", O}, {"b", O}});
  CHECK(mask_observations(all_obs) == std::vector<bool>{false, false});
  const auto none = from_text({{"a", A}, {"b", S}});
  CHECK(mask_observations(none) == std::vector<bool>{true, true});
  const auto t = go_north();
  const auto m = mask_observations(t);
  for (std::size_t i = 0; i < t.tokens.size(); ++i) CHECK(m[i] == (t.tokens[i].role != O));
}

TEST_CASE("extraction matches the reference scanner on random trajectories") {
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    const auto t = oracle::random_tagged_trajectory(seed);
    for (auto mode : {ExtractionMode::kActionOnly, ExtractionMode::kCleanStepNoObservation}) {
      const auto segs = extract_steps(t, mode);
      const auto ref = oracle::extract(t, mode);
      REQUIRE(segs.size() == ref.size());
      for (std::size_t k = 0; k < segs.size(); ++k) {
        CHECK(segs[k].span.start() == ref[k].start);
        CHECK(segs[k].span.end() == ref[k].end);
        std::vector<std::size_t> inc;
        for (std::size_t j = 0; j < segs[k].span.length(); ++j) {
          if (segs[k].included_mask[j]) inc.push_back(segs[k].span.start() + j);
        }
        CHECK(inc == ref[k].included);
      }
    }
  }
}

TEST_CASE("segments are disjoint, sorted, deterministic and role-filtered") {
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    const auto t = oracle::random_tagged_trajectory(seed);
    std::vector<bool> action_inc(t.tokens.size()), clean_inc(t.tokens.size());
    for (auto mode : {ExtractionMode::kActionOnly, ExtractionMode::kCleanStepNoObservation}) {
      const auto segs = extract_steps(t, mode);
      CHECK(segs == extract_steps(t, mode));
      for (std::size_t k = 1; k < segs.size(); ++k) CHECK(segs[k - 1].span.end() <= segs[k].span.start());
      for (const auto& s : segs) {
        for (std::size_t j = 0; j < s.span.length(); ++j) {
          if (!s.included_mask[j]) continue;
          const auto& tok = t.tokens[s.span.start() + j];
          if (mode == ExtractionMode::kActionOnly) {
            CHECK(tok.role == Role::kAction);
            action_inc[s.span.start() + j] = true;
          } else {
            CHECK(tok.role != Role::kObservation);
            clean_inc[s.span.start() + j] = true;
          }
        }
      }
    }
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
      if (action_inc[i]) CHECK(clean_inc[i]);
    }
  }
}

TEST_CASE("structural tags count as policy tokens except environment delimiters") {
  CHECK(is_policy_generated({"<action>", Role::kStructural, 0.0, 1}));
  CHECK_FALSE(is_policy_generated({"<obs>", Role::kStructural, 0.0, 1}));
  CHECK_FALSE(is_policy_generated({"</information>", Role::kStructural, 0.0, 1}));
  CHECK_FALSE(is_policy_generated({"wall", Role::kObservation, 0.0, 1}));
}

TEST_CASE("final answer span is a step in clean mode") {
  const auto t = from_text({{"<action>", S}, {"go", A}, {"</action>", S}, {"<answer>", S},
                            {"key", Role::kAnswer}, {"</answer>", S}});
  const auto segs = extract_steps(t, ExtractionMode::kCleanStepNoObservation);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].included_count() == 6);
}
