#include "stepopsd/toy/vocabulary.hpp"

#include <algorithm>
#include <limits>

#include "stepopsd/errors.hpp"

namespace stepopsd::toy {

Vocabulary::Vocabulary(std::vector<std::string> tokens, const TagGrammar& grammar)
    : tokens_(std::move(tokens)) {
  for (auto framing : {kHindsightOpen, kHindsightClose}) {
    if (std::find(tokens_.begin(), tokens_.end(), framing) == tokens_.end()) {
      tokens_.emplace_back(framing);
    }
  }
  if (tokens_.size() > std::numeric_limits<TokenId>::max()) {
    throw ConfigError("vocabulary too large");
  }
  env_open_.resize(tokens_.size());
  env_close_.resize(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (!index_.emplace(t, static_cast<TokenId>(i)).second) {
      throw ConfigError("duplicate vocabulary token '" + t + "'");
    }
    const auto open = grammar.open_tag(t);
    const auto close = grammar.close_tag(t);
    const auto& env = grammar.environment_tags;
    env_open_[i] = open && std::find(env.begin(), env.end(), *open) != env.end();
    env_close_[i] = close && std::find(env.begin(), env.end(), *close) != env.end();
  }
  hindsight_open_ = id(kHindsightOpen);
  hindsight_close_ = id(kHindsightClose);
}

std::optional<TokenId> Vocabulary::find(std::string_view text) const {
  auto it = index_.find(std::string(text));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view text) const {
  auto found = find(text);
  if (!found) throw ConsistencyError("token '" + std::string(text) + "' is not in the vocabulary");
  return *found;
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> texts) const {
  std::vector<TokenId> ids;
  ids.reserve(texts.size());
  for (const auto& t : texts) ids.push_back(id(t));
  return ids;
}

}  // namespace stepopsd::toy
