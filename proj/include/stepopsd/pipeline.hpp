#pragma once

#include <cstddef>
#include <vector>

#include "stepopsd/hindsight.hpp"
#include "stepopsd/log_prob_provider.hpp"
#include "stepopsd/rescorer.hpp"
#include "stepopsd/shaper.hpp"
#include "stepopsd/step_extractor.hpp"

namespace stepopsd {

struct GroupShapingOptions {
  ExtractionMode mode = ExtractionMode::kActionOnly;
  TagGrammar grammar;
  ShapingConfig shaping;
  double lambda = 0.0;
  double invalid_coeff = 0.1;
  // Off: no extraction or rescoring, every psi = 1.
  bool shaping_enabled = true;
  // Take student log-probs from the rollout records instead of rescoring.
  bool recorded_student = false;
};

struct MemberShaping {
  double adjusted_reward = 0.0;
  double advantage = 0.0;
  bool shaped = false;
  bool dropped_numerical = false;
  std::vector<StepSegment> segments;
  std::vector<GapRecord> gaps;
  std::vector<ShapedAdvantage> tokens;

  std::vector<double> base_advantages() const;
  std::vector<double> shaped_advantages() const;
};

struct GroupShaping {
  std::vector<MemberShaping> members;
  std::optional<std::size_t> peer;
  bool skipped_no_peer = false;
  std::size_t dropped_numerical = 0;
};

// Penalties, group advantages, extraction, hindsight contexts, rescoring and
// shaping for one rollout group. `student` is unused with recorded_student.
GroupShaping shape_group(const RolloutGroup& group, const LogProbProvider& provider,
                         const PolicyParams& teacher, const PolicyParams* student,
                         const GroupShapingOptions& options);

}  // namespace stepopsd
