#include "stepopsd/pipeline.hpp"

#include "stepopsd/errors.hpp"
#include "stepopsd/grpo.hpp"

namespace stepopsd {

std::vector<double> MemberShaping::base_advantages() const {
  std::vector<double> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.a_base);
  return out;
}

std::vector<double> MemberShaping::shaped_advantages() const {
  std::vector<double> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.a_shaped);
  return out;
}

GroupShaping shape_group(const RolloutGroup& group, const LogProbProvider& provider,
                         const PolicyParams& teacher, const PolicyParams* student,
                         const GroupShapingOptions& options) {
  if (!options.recorded_student && options.shaping_enabled && student == nullptr) {
    throw ConfigError("rescoring needs student parameters");
  }
  GroupShaping out;
  std::vector<double> rewards;
  for (const auto& m : group.members) rewards.push_back(apply_reward_penalties(m, options.invalid_coeff));
  const auto adv = group_advantage(rewards);

  if (options.shaping_enabled) {
    out.peer = select_peer(group);
    out.skipped_no_peer = !out.peer.has_value();
  }
  const Trajectory* peer = out.peer ? &group.members[*out.peer] : nullptr;

  for (std::size_t i = 0; i < group.members.size(); ++i) {
    const auto& traj = group.members[i];
    MemberShaping ms;
    ms.adjusted_reward = rewards[i];
    ms.advantage = adv[i];
    const auto base = broadcast_token_advantages(traj, adv[i], options.grammar);

    const bool candidate = options.shaping_enabled && peer != nullptr && !traj.success;
    if (candidate) {
      ms.segments = extract_steps(traj, options.mode, options.grammar);
      try {
        for (const auto& seg : ms.segments) {
          const auto ctx = build_contexts(traj, seg, peer, options.grammar);
          auto gaps = options.recorded_student
                          ? score_step_recorded(provider, teacher, ctx, traj, seg)
                          : score_step(provider, teacher, *student, ctx, traj, seg);
          ms.gaps.insert(ms.gaps.end(), gaps.begin(), gaps.end());
        }
        ms.shaped = true;
      } catch (const NumericalError&) {
        ms.gaps.clear();
        ms.dropped_numerical = true;
        ++out.dropped_numerical;
      }
    }
    ms.tokens = shape_trajectory(traj, ms.segments, ms.gaps, base, options.lambda,
                                 options.shaping, ms.shaped);
    out.members.push_back(std::move(ms));
  }
  return out;
}

}  // namespace stepopsd
