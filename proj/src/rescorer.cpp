#include "stepopsd/rescorer.hpp"

#include <algorithm>
#include <cmath>

#include "stepopsd/errors.hpp"

namespace stepopsd {

double floor_logprob(double lp) {
  if (!std::isfinite(lp)) throw NumericalError("log-probability is not finite");
  return std::max(lp, kLogProbFloor);
}

namespace {

std::vector<std::string> span_texts(const Trajectory& traj, const StepSegment& segment) {
  if (segment.span.end() > traj.tokens.size() ||
      segment.included_mask.size() != segment.span.length()) {
    throw ConsistencyError("segment does not match trajectory '" + traj.id + "'");
  }
  std::vector<std::string> out;
  for (std::size_t i = segment.span.start(); i < segment.span.end(); ++i) {
    out.push_back(traj.tokens[i].text);
  }
  return out;
}

std::vector<GapRecord> make_records(const StepSegment& segment, const std::vector<double>& teacher,
                                    const std::vector<double>& student) {
  if (teacher.size() != segment.span.length() || student.size() != segment.span.length()) {
    throw ConsistencyError("log-prob provider returned the wrong number of scores");
  }
  std::vector<GapRecord> out;
  for (std::size_t j = 0; j < segment.span.length(); ++j) {
    if (!segment.included_mask[j]) continue;
    GapRecord g;
    g.step_index = segment.step_index;
    g.token_offset = j;
    g.token_index = segment.span.start() + j;
    g.teacher_logprob = floor_logprob(teacher[j]);
    g.student_logprob = floor_logprob(student[j]);
    g.delta = g.teacher_logprob - g.student_logprob;
    out.push_back(g);
  }
  return out;
}

}  // namespace

std::vector<GapRecord> score_step(const LogProbProvider& provider, const PolicyParams& teacher,
                                  const PolicyParams& student, const HindsightContext& ctx,
                                  const Trajectory& traj, const StepSegment& segment) {
  const auto realized = span_texts(traj, segment);
  const auto t = provider.score(teacher, ctx.teacher_context, realized);
  const auto s = provider.score(student, ctx.student_context, realized);
  return make_records(segment, t, s);
}

std::vector<GapRecord> score_step_recorded(const LogProbProvider& provider,
                                           const PolicyParams& teacher, const HindsightContext& ctx,
                                           const Trajectory& traj, const StepSegment& segment) {
  const auto realized = span_texts(traj, segment);
  const auto t = provider.score(teacher, ctx.teacher_context, realized);
  std::vector<double> s;
  for (std::size_t i = segment.span.start(); i < segment.span.end(); ++i) {
    s.push_back(traj.tokens[i].student_logprob);
  }
  return make_records(segment, t, s);
}

}  // namespace stepopsd
