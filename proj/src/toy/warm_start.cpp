#include "stepopsd/toy/warm_start.hpp"

#include "stepopsd/errors.hpp"
#include "stepopsd/toy/rollout.hpp"

namespace stepopsd::toy {

std::size_t warm_start(const Environment& env, const SoftmaxPolicy& policy, PolicyParams& params,
                       const WarmStartConfig& config) {
  if (config.epochs < 0 || config.tasks_per_epoch < 0) {
    throw ConfigError("warm start epochs and tasks must be non-negative");
  }
  if (config.noise < 0.0 || config.noise > 1.0) throw ConfigError("warm start noise must be in [0, 1]");
  const auto& vocab = *env.vocabulary();
  std::size_t updates = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int task = 0; task < config.tasks_per_epoch; ++task) {
      Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch),
                       static_cast<std::uint64_t>(task)));
      const std::uint64_t task_seed = rng.next_u64() >> 32;
      const auto demo = env.demonstration(task_seed, rng, config.noise);
      const auto traj = replay_episode(env, task_seed, demo, 0, "demo");
      std::vector<TokenId> ids;
      ids.reserve(traj.tokens.size());
      for (const auto& tok : traj.tokens) {
        if (is_policy_generated(tok, env.tags())) {
          const auto g = policy.grad_logprob(params, ids, vocab.id(tok.text));
          for (auto r : g.rows) {
            auto row = params.row(r);
            for (std::size_t v = 0; v < row.size(); ++v) row[v] += config.learning_rate * g.coef[v];
          }
          ++updates;
        }
        ids.push_back(vocab.id(tok.text));
      }
    }
  }
  if (!params.all_finite()) throw NumericalError("warm start produced non-finite weights");
  return updates;
}

}  // namespace stepopsd::toy
