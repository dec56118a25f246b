#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stepopsd/step_extractor.hpp"
#include "stepopsd/toy/policy_params.hpp"
#include "stepopsd/trajectory.hpp"

namespace stepopsd {

using toy::PolicyParams;

// Frozen copy of the policy used as teacher and KL reference.
struct TeacherSnapshot {
  std::shared_ptr<const PolicyParams> params;
  int taken_at_step = -1;

  bool empty() const { return params == nullptr; }

  void save(const std::string& path) const;
  static TeacherSnapshot load(const std::string& path);
};

TeacherSnapshot take_snapshot(const PolicyParams& params, int step);

// New snapshot of `current` iff step is a multiple of `interval` (step 0
// always); otherwise `snapshot` is returned as is.
TeacherSnapshot maybe_refresh(const TeacherSnapshot& snapshot, const PolicyParams& current, int step,
                              int interval);

// Index of the first successful member, in rollout order.
std::optional<std::size_t> select_peer(const RolloutGroup& group);

struct HindsightContext {
  std::vector<std::string> student_context;
  std::optional<std::vector<std::string>> hindsight;  // framed block
  std::vector<std::string> teacher_context;           // hindsight followed by student context
  bool shaped = false;
};

// `<hindsight>`, the peer's policy-generated tokens, `</hindsight>`.
std::vector<std::string> render_hindsight(const Trajectory& peer, const TagGrammar& grammar = {});

// Throws ConsistencyError when the segment does not lie inside `traj`.
HindsightContext build_contexts(const Trajectory& traj, const StepSegment& segment,
                                const Trajectory* peer, const TagGrammar& grammar = {});

}  // namespace stepopsd
