#pragma once

#include <cstddef>
#include <vector>

#include "stepopsd/hindsight.hpp"
#include "stepopsd/log_prob_provider.hpp"
#include "stepopsd/step_extractor.hpp"

namespace stepopsd {

inline constexpr double kLogProbFloor = -30.0;

struct GapRecord {
  std::size_t step_index = 0;
  std::size_t token_offset = 0;  // j, position inside the step span
  std::size_t token_index = 0;   // absolute index in the trajectory
  double teacher_logprob = 0.0;
  double student_logprob = 0.0;
  double delta = 0.0;

  bool operator==(const GapRecord&) const = default;
};

// Throws NumericalError on NaN/inf, otherwise clamps at kLogProbFloor.
double floor_logprob(double lp);

// Teacher-forced gaps over the segment's span: the teacher conditions on the
// teacher context, the student on the student context, both followed by the
// realized span tokens before position j. Only included tokens get records.
std::vector<GapRecord> score_step(const LogProbProvider& provider, const PolicyParams& teacher,
                                  const PolicyParams& student, const HindsightContext& ctx,
                                  const Trajectory& traj, const StepSegment& segment);

// Same, taking the student log-probs recorded at rollout time.
std::vector<GapRecord> score_step_recorded(const LogProbProvider& provider,
                                           const PolicyParams& teacher, const HindsightContext& ctx,
                                           const Trajectory& traj, const StepSegment& segment);

}  // namespace stepopsd
