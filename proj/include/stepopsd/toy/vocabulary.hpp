#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stepopsd/step_extractor.hpp"

namespace stepopsd::toy {

using TokenId = std::uint16_t;

inline constexpr std::string_view kHindsightOpen = "<hindsight>";
inline constexpr std::string_view kHindsightClose = "</hindsight>";

// Closed word-level vocabulary of one environment. The hindsight framing
// delimiters are always present; environment-block delimiters are derived
// from the tag grammar.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> tokens, const TagGrammar& grammar = {});

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::optional<TokenId> find(std::string_view text) const;
  // Throws ConsistencyError for out-of-vocabulary text.
  TokenId id(std::string_view text) const;
  const std::string& text(TokenId id) const { return tokens_.at(id); }

  std::vector<TokenId> encode(std::span<const std::string> texts) const;

  TokenId hindsight_open() const { return hindsight_open_; }
  TokenId hindsight_close() const { return hindsight_close_; }
  bool is_env_open(TokenId id) const { return env_open_.at(id); }
  bool is_env_close(TokenId id) const { return env_close_.at(id); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<bool> env_open_;
  std::vector<bool> env_close_;
  TokenId hindsight_open_ = 0;
  TokenId hindsight_close_ = 0;
};

}  // namespace stepopsd::toy
