#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stepopsd/log_prob_provider.hpp"
#include "stepopsd/toy/policy_params.hpp"
#include "stepopsd/toy/vocabulary.hpp"

namespace stepopsd::toy {

struct PolicyConfig {
  int window = 8;          // tokens of recent context feeding n-gram features
  int max_ngram = 3;
  int turn_buckets = 8;
  // Prompt tokens conjoined with the last token, and with (slot, turn bucket,
  // last token).
  bool prompt_features = true;
  // Fixed in-context copy bias applied when the context opens with a
  // hindsight block: continuations of the longest suffix match get this bonus.
  double hindsight_copy_bonus = 2.0;
  int induction_max_match = 4;
};

// Constrained decoding: the environment restricts which tokens may follow a
// prefix (context without any hindsight block).
class ActionGrammar {
 public:
  virtual ~ActionGrammar() = default;
  virtual void allowed_next(std::span<const TokenId> prefix, std::vector<TokenId>& out) const = 0;
};

struct ContextView {
  bool has_hindsight = false;
  std::span<const TokenId> hindsight;
  std::span<const TokenId> prefix;
};

// Splits a leading `<hindsight> ... </hindsight>` block from the causal prefix.
ContextView split_context(const Vocabulary& vocab, std::span<const TokenId> context);

// Masked distribution at one decision point.
struct Evaluation {
  std::vector<std::uint32_t> features;
  std::vector<TokenId> allowed;
  std::vector<double> log_probs;  // aligned with `allowed`
  std::vector<double> probs;

  // log pi(token); -inf when the grammar forbids it.
  double log_prob_of(TokenId token) const;
};

// Sparse rank-one gradient of log pi(token | context) with respect to the
// weight matrix: d/dW[r, v] = multiplicity(r) * coef[v] for r in rows.
struct TokenGradient {
  std::vector<std::uint32_t> rows;
  std::vector<double> coef;  // length V: onehot(token) - p on the allowed set, 0 elsewhere
  double log_prob = 0.0;
};

class SoftmaxPolicy final : public LogProbProvider {
 public:
  // `grammar` may be null (unconstrained over the whole vocabulary).
  SoftmaxPolicy(std::shared_ptr<const Vocabulary> vocabulary, PolicyConfig config,
                const ActionGrammar* grammar);

  const Vocabulary& vocabulary() const { return *vocabulary_; }
  const PolicyConfig& config() const { return config_; }

  std::vector<std::uint32_t> features(const PolicyParams& params,
                                      std::span<const TokenId> context) const;
  // Copy bias over the vocabulary induced by a hindsight block (all zero
  // without one).
  std::vector<double> hindsight_bias(std::span<const TokenId> context) const;
  std::vector<double> logits(const PolicyParams& params, std::span<const TokenId> context) const;

  // Unconstrained softmax over the full vocabulary.
  std::vector<double> distribution(const PolicyParams& params, std::span<const TokenId> context) const;

  // Grammar-masked distribution.
  Evaluation evaluate(const PolicyParams& params, std::span<const TokenId> context) const;

  double log_prob(const PolicyParams& params, std::span<const TokenId> context, TokenId token) const;
  TokenGradient grad_logprob(const PolicyParams& params, std::span<const TokenId> context,
                             TokenId token) const;

  std::vector<double> score_ids(const PolicyParams& params, std::span<const TokenId> context,
                                std::span<const TokenId> realized) const;
  std::vector<double> score(const PolicyParams& params, std::span<const std::string> context,
                            std::span<const std::string> realized) const override;

 private:
  void check_params(const PolicyParams& params) const;

  std::shared_ptr<const Vocabulary> vocabulary_;
  PolicyConfig config_;
  const ActionGrammar* grammar_;
};

}  // namespace stepopsd::toy
