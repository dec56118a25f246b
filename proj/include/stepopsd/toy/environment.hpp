#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stepopsd/step_extractor.hpp"
#include "stepopsd/toy/policy.hpp"
#include "stepopsd/toy/rng.hpp"
#include "stepopsd/toy/vocabulary.hpp"
#include "stepopsd/trajectory.hpp"

namespace stepopsd::toy {

enum class EnvKind { kLatchWorld, kFactChain };

std::string_view env_kind_name(EnvKind kind);
std::optional<EnvKind> parse_env_kind(std::string_view name);

enum class Template { kPick = 0, kLook, kClean, kHeat, kCool, kPickTwo };
enum class Latent { kRaw, kHeated, kCooled, kCleaned };

inline constexpr int kLatchTemplates = 6;
inline constexpr int kLatchObjects = 6;

struct LatchState {
  Template goal = Template::kPick;
  std::vector<int> goal_objects;  // one entry, two for pick-two
  int target = 0;                 // location index
  std::vector<int> object_location;  // per object; -1 when held, -2 when absent
  std::vector<Latent> latent;        // per object
  int location = 0;
  std::optional<int> held;
  bool lamp_on = false;
  int turn = 0;
  bool done = false;

  bool operator==(const LatchState&) const = default;
};

struct FactState {
  int chain = 0;
  int question_entity = 0;
  int answer_entity = 0;
  std::optional<int> cursor;  // entity the next query must start from
  bool poisoned = false;
  std::uint32_t retrieved = 0;  // bitmask over entities
  int turn = 0;
  bool done = false;

  bool operator==(const FactState&) const = default;
};

using EnvState = std::variant<LatchState, FactState>;

struct EnvReset {
  EnvState state;
  std::vector<std::string> observation;  // includes block delimiters
};

struct StepResult {
  std::vector<std::string> observation;  // empty on termination
  EnvState state;
  bool done = false;
  double reward = 0.0;
  bool invalid = false;
};

// A deterministic text environment with a closed vocabulary and an action
// grammar used for constrained decoding.
class Environment : public ActionGrammar {
 public:
  virtual EnvKind kind() const = 0;
  virtual const std::shared_ptr<const Vocabulary>& vocabulary() const = 0;
  virtual const TagGrammar& tags() const = 0;
  virtual int default_max_turns() const = 0;
  virtual ExtractionMode default_extraction_mode() const = 0;

  virtual EnvReset reset(std::uint64_t task_seed) const = 0;
  // Malformed or inapplicable actions are invalid, never an exception.
  virtual StepResult step(const EnvState& state, std::span<const std::string> action) const = 0;

  // True once the tokens generated in the current turn form a complete action.
  virtual bool turn_complete(std::span<const TokenId> turn_tokens) const = 0;
  // Role of content tokens inside the given tag.
  virtual Role content_role(std::string_view tag) const = 0;

  // Scripted open-loop demonstration, one token list per turn. With
  // probability `noise` the critical decision is corrupted.
  virtual std::vector<std::vector<std::string>> demonstration(std::uint64_t task_seed, Rng& rng,
                                                              double noise) const = 0;

  // Tokens produced in the current turn: the suffix after the last
  // environment-block delimiter.
  std::span<const TokenId> current_turn(std::span<const TokenId> prefix) const;
};

std::unique_ptr<Environment> make_environment(EnvKind kind);

// Free-function forms of reset/step keyed by kind.
EnvReset env_reset(EnvKind kind, std::uint64_t task_seed);
StepResult env_step(const EnvState& state, std::span<const std::string> action);

}  // namespace stepopsd::toy
