#pragma once

#include "stepopsd/toy/environment.hpp"

namespace stepopsd::toy {

// Household pick-and-place world with hidden object state. Six goal templates
// mirror the ALFWorld categories; heat/cool/clean (and the lamp for look)
// change state that the final placement does not reveal.
//
// Actions are `<action> VERB ARG </action>`:
//   find OBJ      move to the object's location
//   take OBJ      pick up an object at the current location (hands empty)
//   goto LOC      move to another location
//   place OBJ     put the held object down here; ends the episode once every
//                 goal object sits at the target
//   heat|cool|clean OBJ   at microwave | fridge | sinkbasin, holding OBJ
//   use desklamp  switch the lamp on while standing at it
//   examine OBJ   ends the episode (look template)
// Inapplicable actions observe `nothing happens` and leave the state unchanged.
class LatchWorld final : public Environment {
 public:
  LatchWorld();

  EnvKind kind() const override { return EnvKind::kLatchWorld; }
  const std::shared_ptr<const Vocabulary>& vocabulary() const override { return vocabulary_; }
  const TagGrammar& tags() const override { return tags_; }
  int default_max_turns() const override { return 8; }
  ExtractionMode default_extraction_mode() const override { return ExtractionMode::kActionOnly; }

  EnvReset reset(std::uint64_t task_seed) const override;
  StepResult step(const EnvState& state, std::span<const std::string> action) const override;
  void allowed_next(std::span<const TokenId> prefix, std::vector<TokenId>& out) const override;
  bool turn_complete(std::span<const TokenId> turn_tokens) const override;
  Role content_role(std::string_view tag) const override;
  std::vector<std::vector<std::string>> demonstration(std::uint64_t task_seed, Rng& rng,
                                                      double noise) const override;

  StepResult step_latch(const LatchState& state, std::span<const std::string> action) const;

  // Noise-free plan for a task, one action (verb, arg) per turn.
  std::vector<std::pair<std::string, std::string>> solution(std::uint64_t task_seed) const;
  static std::vector<std::string> render_action(const std::string& verb, const std::string& arg);

  static const std::vector<std::string>& verbs();
  static const std::vector<std::string>& objects();
  static const std::vector<std::string>& locations();
  static int location_index(std::string_view name);

 private:
  std::shared_ptr<const Vocabulary> vocabulary_;
  TagGrammar tags_;
  TokenId action_open_ = 0;
  TokenId action_close_ = 0;
  std::vector<TokenId> verb_ids_;
  std::vector<TokenId> arg_ids_;
};

}  // namespace stepopsd::toy
