#include "stepopsd/toy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stepopsd/errors.hpp"
#include "stepopsd/toy/rng.hpp"

namespace stepopsd::toy {

namespace {

constexpr TokenId kBos = std::numeric_limits<TokenId>::max();

enum FeatureKind : std::uint64_t {
  kBias = 1,
  kTurn = 2,
  kNgram = 3,
  kPrompt = 4,
  kTurnLast = 5,
  kPromptTurn = 6
};

class FeatureHash {
 public:
  FeatureHash(std::uint64_t seed, FeatureKind kind) : h_(mix_seed(seed, kind)) {}
  FeatureHash& add(std::uint64_t x) {
    h_ = splitmix64(h_ ^ (x + 0x2545f4914f6cdd1dULL));
    return *this;
  }
  std::uint32_t row(std::size_t dimension) const {
    return static_cast<std::uint32_t>(h_ & (dimension - 1));
  }

 private:
  std::uint64_t h_;
};

// BOS followed by the policy-generated part of the prefix (environment
// blocks removed).
std::vector<TokenId> policy_view(const Vocabulary& vocab, std::span<const TokenId> prefix) {
  std::vector<TokenId> view{kBos};
  bool in_env = false;
  for (TokenId t : prefix) {
    if (in_env) {
      if (vocab.is_env_close(t)) in_env = false;
      continue;
    }
    if (vocab.is_env_open(t)) {
      in_env = true;
      continue;
    }
    view.push_back(t);
  }
  return view;
}

}  // namespace

ContextView split_context(const Vocabulary& vocab, std::span<const TokenId> context) {
  ContextView view;
  if (context.empty() || context.front() != vocab.hindsight_open()) {
    view.prefix = context;
    return view;
  }
  const auto close = std::find(context.begin() + 1, context.end(), vocab.hindsight_close());
  if (close == context.end()) throw ConsistencyError("hindsight block is never closed");
  view.has_hindsight = true;
  view.hindsight = std::span<const TokenId>(context.begin() + 1, close);
  view.prefix = std::span<const TokenId>(close + 1, context.end());
  return view;
}

double Evaluation::log_prob_of(TokenId token) const {
  for (std::size_t i = 0; i < allowed.size(); ++i) {
    if (allowed[i] == token) return log_probs[i];
  }
  return -std::numeric_limits<double>::infinity();
}

SoftmaxPolicy::SoftmaxPolicy(std::shared_ptr<const Vocabulary> vocabulary, PolicyConfig config,
                             const ActionGrammar* grammar)
    : vocabulary_(std::move(vocabulary)), config_(config), grammar_(grammar) {
  if (!vocabulary_) throw ConfigError("policy needs a vocabulary");
  if (config_.window < 1 || config_.max_ngram < 1 || config_.turn_buckets < 1 ||
      config_.induction_max_match < 1) {
    throw ConfigError("policy feature configuration must use positive sizes");
  }
}

void SoftmaxPolicy::check_params(const PolicyParams& params) const {
  if (params.vocab_size() != vocabulary_->size()) {
    throw ConsistencyError("policy parameters and policy disagree on the vocabulary size");
  }
}

std::vector<std::uint32_t> SoftmaxPolicy::features(const PolicyParams& params,
                                                   std::span<const TokenId> context) const {
  const auto prefix = split_context(*vocabulary_, context).prefix;
  const std::size_t dim = params.dimension();
  const std::uint64_t seed = params.hash_seed();
  std::vector<std::uint32_t> rows;
  rows.reserve(40);

  rows.push_back(FeatureHash(seed, kBias).row(dim));

  const auto turns = std::count_if(prefix.begin(), prefix.end(),
                                   [&](TokenId t) { return vocabulary_->is_env_close(t); });
  const auto bucket = std::min<std::ptrdiff_t>(turns, config_.turn_buckets - 1);
  rows.push_back(FeatureHash(seed, kTurn).add(static_cast<std::uint64_t>(bucket)).row(dim));

  const std::size_t len = prefix.size();
  const std::size_t window = std::min<std::size_t>(static_cast<std::size_t>(config_.window), len);
  const std::size_t window_start = len - window;
  for (std::size_t end = len; end > window_start; --end) {
    const std::size_t offset = len - end + 1;
    for (std::size_t n = 1; n <= static_cast<std::size_t>(config_.max_ngram); ++n) {
      if (end < n || end - n < window_start) break;
      FeatureHash h(seed, kNgram);
      h.add(n).add(offset);
      for (std::size_t i = end - n; i < end; ++i) h.add(prefix[i]);
      rows.push_back(h.row(dim));
    }
  }

  const TokenId last = prefix.empty() ? kBos : prefix.back();
  rows.push_back(FeatureHash(seed, kTurnLast).add(static_cast<std::uint64_t>(bucket)).add(last).row(dim));

  if (config_.prompt_features) {
    const auto open = std::find_if(prefix.begin(), prefix.end(),
                                   [&](TokenId t) { return vocabulary_->is_env_open(t); });
    if (open != prefix.end()) {
      std::uint64_t slot = 0;
      for (auto it = open + 1; it != prefix.end() && !vocabulary_->is_env_close(*it); ++it, ++slot) {
        rows.push_back(FeatureHash(seed, kPrompt).add(*it).add(last).row(dim));
        rows.push_back(FeatureHash(seed, kPromptTurn)
                           .add(slot)
                           .add(*it)
                           .add(static_cast<std::uint64_t>(bucket))
                           .add(last)
                           .row(dim));
      }
    }
  }
  return rows;
}

std::vector<double> SoftmaxPolicy::hindsight_bias(std::span<const TokenId> context) const {
  std::vector<double> bias(vocabulary_->size(), 0.0);
  const auto view = split_context(*vocabulary_, context);
  if (!view.has_hindsight || config_.hindsight_copy_bonus == 0.0) return bias;

  const auto query = policy_view(*vocabulary_, view.prefix);
  std::vector<TokenId> hint{kBos};
  hint.insert(hint.end(), view.hindsight.begin(), view.hindsight.end());

  const std::size_t max_match =
      std::min<std::size_t>(static_cast<std::size_t>(config_.induction_max_match), query.size());
  for (std::size_t m = max_match; m >= 1; --m) {
    bool found = false;
    for (std::size_t i = m; i < hint.size(); ++i) {
      if (std::equal(hint.begin() + static_cast<std::ptrdiff_t>(i - m),
                     hint.begin() + static_cast<std::ptrdiff_t>(i),
                     query.end() - static_cast<std::ptrdiff_t>(m))) {
        bias[hint[i]] = config_.hindsight_copy_bonus;
        found = true;
      }
    }
    if (found) break;
  }
  return bias;
}

std::vector<double> SoftmaxPolicy::logits(const PolicyParams& params,
                                          std::span<const TokenId> context) const {
  check_params(params);
  auto z = hindsight_bias(context);
  for (auto r : features(params, context)) {
    const auto row = params.row(r);
    for (std::size_t v = 0; v < z.size(); ++v) z[v] += row[v];
  }
  return z;
}

std::vector<double> SoftmaxPolicy::distribution(const PolicyParams& params,
                                                std::span<const TokenId> context) const {
  auto z = logits(params, context);
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (auto& v : z) {
    v = std::exp(v - zmax);
    total += v;
  }
  for (auto& v : z) v /= total;
  return z;
}

Evaluation SoftmaxPolicy::evaluate(const PolicyParams& params, std::span<const TokenId> context) const {
  check_params(params);
  Evaluation ev;
  ev.features = features(params, context);
  if (grammar_) {
    grammar_->allowed_next(split_context(*vocabulary_, context).prefix, ev.allowed);
    if (ev.allowed.empty()) throw ConsistencyError("grammar allows no continuation");
  } else {
    ev.allowed.resize(vocabulary_->size());
    for (std::size_t v = 0; v < ev.allowed.size(); ++v) ev.allowed[v] = static_cast<TokenId>(v);
  }
  const auto bias = hindsight_bias(context);
  ev.log_probs.resize(ev.allowed.size());
  for (std::size_t i = 0; i < ev.allowed.size(); ++i) {
    const TokenId v = ev.allowed[i];
    double z = bias[v];
    for (auto r : ev.features) z += params.at(r, v);
    ev.log_probs[i] = z;
  }
  const double zmax = *std::max_element(ev.log_probs.begin(), ev.log_probs.end());
  double total = 0.0;
  for (double z : ev.log_probs) total += std::exp(z - zmax);
  const double log_norm = zmax + std::log(total);
  ev.probs.resize(ev.allowed.size());
  for (std::size_t i = 0; i < ev.allowed.size(); ++i) {
    ev.log_probs[i] -= log_norm;
    ev.probs[i] = std::exp(ev.log_probs[i]);
  }
  if (ev.allowed.size() == 1) {
    ev.log_probs[0] = 0.0;
    ev.probs[0] = 1.0;
  }
  return ev;
}

double SoftmaxPolicy::log_prob(const PolicyParams& params, std::span<const TokenId> context,
                               TokenId token) const {
  return evaluate(params, context).log_prob_of(token);
}

TokenGradient SoftmaxPolicy::grad_logprob(const PolicyParams& params,
                                          std::span<const TokenId> context, TokenId token) const {
  auto ev = evaluate(params, context);
  TokenGradient g;
  g.log_prob = ev.log_prob_of(token);
  if (!std::isfinite(g.log_prob)) {
    throw ConsistencyError("gradient requested for a token the grammar forbids");
  }
  g.coef.assign(vocabulary_->size(), 0.0);
  for (std::size_t i = 0; i < ev.allowed.size(); ++i) {
    g.coef[ev.allowed[i]] = (ev.allowed[i] == token ? 1.0 : 0.0) - ev.probs[i];
  }
  if (ev.allowed.size() == 1) g.coef[token] = 0.0;
  g.rows = std::move(ev.features);
  return g;
}

std::vector<double> SoftmaxPolicy::score_ids(const PolicyParams& params,
                                             std::span<const TokenId> context,
                                             std::span<const TokenId> realized) const {
  std::vector<TokenId> buffer(context.begin(), context.end());
  buffer.reserve(context.size() + realized.size());
  std::vector<double> out;
  out.reserve(realized.size());
  for (TokenId t : realized) {
    out.push_back(log_prob(params, buffer, t));
    buffer.push_back(t);
  }
  return out;
}

std::vector<double> SoftmaxPolicy::score(const PolicyParams& params,
                                         std::span<const std::string> context,
                                         std::span<const std::string> realized) const {
  return score_ids(params, vocabulary_->encode(context), vocabulary_->encode(realized));
}

}  // namespace stepopsd::toy
