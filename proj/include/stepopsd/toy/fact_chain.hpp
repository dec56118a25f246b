#pragma once

#include <array>

#include "stepopsd/toy/environment.hpp"

namespace stepopsd::toy {

// Two-hop retrieval QA over a fixed eight-chain knowledge base.
//
// Each turn is `<think> W </think>` followed by either
// `<search> ENTITY RELATION </search>` or `<answer> ENTITY </answer>`.
// A search succeeds only from the entity last retrieved (the question entity
// at the start) and only while the episode is unpoisoned; a failed search
// returns `no results` and poisons the episode, after which no search
// succeeds. Answering ends the episode with reward 1 iff the answer is the
// correct entity and it was retrieved.
class FactChain final : public Environment {
 public:
  static constexpr int kChains = 8;

  struct Fact {
    int subject;
    int relation;
    int object;
  };

  FactChain();

  EnvKind kind() const override { return EnvKind::kFactChain; }
  const std::shared_ptr<const Vocabulary>& vocabulary() const override { return vocabulary_; }
  const TagGrammar& tags() const override { return tags_; }
  int default_max_turns() const override { return 5; }
  ExtractionMode default_extraction_mode() const override {
    return ExtractionMode::kCleanStepNoObservation;
  }

  EnvReset reset(std::uint64_t task_seed) const override;
  StepResult step(const EnvState& state, std::span<const std::string> action) const override;
  void allowed_next(std::span<const TokenId> prefix, std::vector<TokenId>& out) const override;
  bool turn_complete(std::span<const TokenId> turn_tokens) const override;
  Role content_role(std::string_view tag) const override;
  std::vector<std::vector<std::string>> demonstration(std::uint64_t task_seed, Rng& rng,
                                                      double noise) const override;

  StepResult step_fact(const FactState& state, std::span<const std::string> action) const;

  const std::vector<Fact>& knowledge_base() const { return kb_; }
  std::optional<int> lookup(int subject, int relation) const;

  // Every well-formed action from `state` (think word fixed), for search-based
  // checks over the state space.
  std::vector<std::vector<std::string>> candidate_actions() const;

  static const std::vector<std::string>& entities();
  static const std::vector<std::string>& relations();
  static const std::vector<std::string>& think_words();

 private:
  std::shared_ptr<const Vocabulary> vocabulary_;
  TagGrammar tags_;
  std::vector<Fact> kb_;
  TokenId think_open_ = 0, think_close_ = 0, search_open_ = 0, search_close_ = 0;
  TokenId answer_open_ = 0, answer_close_ = 0;
  std::vector<TokenId> think_ids_, entity_ids_, relation_ids_;
};

}  // namespace stepopsd::toy
