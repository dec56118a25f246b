#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stepopsd/toy/environment.hpp"
#include "stepopsd/toy/policy.hpp"
#include "stepopsd/trajectory.hpp"

namespace stepopsd::toy {

struct RolloutOptions {
  int group_size = 8;
  int max_turns = 0;         // 0 selects the environment default
  int max_turn_tokens = 16;  // guard against a grammar that never completes a turn
};

// Incremental trajectory renderer: assigns roles from the tag grammar and
// keeps token ids alongside the records.
class EpisodeRecorder {
 public:
  EpisodeRecorder(const Environment& env, std::string id);

  void add_environment(const std::vector<std::string>& texts, int turn);
  void add_policy(TokenId token, double logprob, int turn);

  const std::vector<TokenId>& ids() const { return ids_; }
  Trajectory& trajectory() { return traj_; }

 private:
  void push(const std::string& text, double logprob, int turn);

  const Environment& env_;
  Trajectory traj_;
  std::vector<TokenId> ids_;
  std::optional<std::string> open_tag_;
};

// Samples one episode with grammar-constrained decoding. Episodes that run
// out of turns end with reward 0.
Trajectory rollout_trajectory(const Environment& env, const SoftmaxPolicy& policy,
                              const PolicyParams& params, std::uint64_t task_seed, Rng& rng,
                              int max_turns, const std::string& id, int max_turn_tokens = 16);

// G members on one task; member i samples from the stream
// mix_seed(run_seed, stream_key, i).
RolloutGroup rollout_group(const Environment& env, const SoftmaxPolicy& policy,
                           const PolicyParams& params, std::uint64_t task_seed,
                           std::uint64_t run_seed, std::uint64_t stream_key,
                           const RolloutOptions& options, const std::string& group_id);

// Replays scripted turns through the environment. Policy tokens are scored
// under `params` when a policy is given, otherwise recorded with log-prob 0.
Trajectory replay_episode(const Environment& env, std::uint64_t task_seed,
                          const std::vector<std::vector<std::string>>& turns, int max_turns,
                          const std::string& id, const SoftmaxPolicy* policy = nullptr,
                          const PolicyParams* params = nullptr);

std::string join_tokens(const std::vector<std::string>& texts);

}  // namespace stepopsd::toy
