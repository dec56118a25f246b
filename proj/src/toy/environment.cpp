#include "stepopsd/toy/environment.hpp"

#include "stepopsd/toy/fact_chain.hpp"
#include "stepopsd/toy/latch_world.hpp"

namespace stepopsd::toy {

std::string_view env_kind_name(EnvKind kind) {
  return kind == EnvKind::kLatchWorld ? "latchworld" : "factchain";
}

std::optional<EnvKind> parse_env_kind(std::string_view name) {
  if (name == "latchworld") return EnvKind::kLatchWorld;
  if (name == "factchain") return EnvKind::kFactChain;
  return std::nullopt;
}

std::span<const TokenId> Environment::current_turn(std::span<const TokenId> prefix) const {
  const auto& vocab = *vocabulary();
  std::size_t start = 0;
  for (std::size_t i = prefix.size(); i > 0; --i) {
    if (vocab.is_env_close(prefix[i - 1])) {
      start = i;
      break;
    }
  }
  return prefix.subspan(start);
}

std::unique_ptr<Environment> make_environment(EnvKind kind) {
  if (kind == EnvKind::kLatchWorld) return std::make_unique<LatchWorld>();
  return std::make_unique<FactChain>();
}

namespace {

const Environment& shared_env(EnvKind kind) {
  static const LatchWorld latch;
  static const FactChain fact;
  if (kind == EnvKind::kLatchWorld) return latch;
  return fact;
}

}  // namespace

EnvReset env_reset(EnvKind kind, std::uint64_t task_seed) {
  return shared_env(kind).reset(task_seed);
}

StepResult env_step(const EnvState& state, std::span<const std::string> action) {
  const EnvKind kind =
      std::holds_alternative<LatchState>(state) ? EnvKind::kLatchWorld : EnvKind::kFactChain;
  return shared_env(kind).step(state, action);
}

}  // namespace stepopsd::toy
