#pragma once

#include <cstdint>

#include "stepopsd/toy/environment.hpp"
#include "stepopsd/toy/policy.hpp"

namespace stepopsd::toy {

// Behaviour cloning on noisy scripted demonstrations, giving RL a competent
// but imperfect starting policy. With epochs = 0 the parameters stay zero.
// Online SGD: every active feature row moves, so keep the rate small.
struct WarmStartConfig {
  int epochs = 30;
  int tasks_per_epoch = 200;
  double noise = 0.5;  // probability a demonstration corrupts its critical decision
  double learning_rate = 0.02;
  std::uint64_t seed = 7;
};

// Returns the number of token updates applied.
std::size_t warm_start(const Environment& env, const SoftmaxPolicy& policy, PolicyParams& params,
                       const WarmStartConfig& config);

}  // namespace stepopsd::toy
