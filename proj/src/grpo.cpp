#include "stepopsd/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "stepopsd/errors.hpp"

namespace stepopsd {

double apply_reward_penalties(const Trajectory& traj, double invalid_coeff) {
  if (invalid_coeff < 0.0) throw ConfigError("invalid-action coefficient must be non-negative");
  return traj.reward - invalid_coeff * static_cast<double>(traj.invalid_action_count);
}

GroupStats group_stats(std::span<const double> rewards) {
  if (rewards.size() < 2) throw ConfigError("group advantage needs at least two rewards");
  GroupStats s;
  const double n = static_cast<double>(rewards.size());
  for (double r : rewards) s.mean += r;
  s.mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - s.mean) * (r - s.mean);
  s.std = std::sqrt(var / n);
  s.advantages.assign(rewards.size(), 0.0);
  if (s.std > kAdvantageEps) {
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      s.advantages[i] = (rewards[i] - s.mean) / (s.std + kAdvantageEps);
    }
  }
  return s;
}

std::vector<double> group_advantage(std::span<const double> rewards) {
  return group_stats(rewards).advantages;
}

std::vector<double> broadcast_token_advantages(const Trajectory& traj, double a,
                                               const TagGrammar& grammar) {
  std::vector<double> out(traj.tokens.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (is_policy_generated(traj.tokens[i], grammar)) out[i] = a;
  }
  return out;
}

double kl_token_penalty(double logp_policy, double logp_ref) {
  const double d = logp_ref - logp_policy;
  return std::expm1(d) - d;
}

std::vector<TokenTerm> token_terms(const SoftmaxPolicy& policy, const PolicyParams& params,
                                   const PolicyParams* ref,
                                   std::span<const Trajectory* const> batch,
                                   const TagGrammar& grammar) {
  const auto& vocab = policy.vocabulary();
  std::vector<TokenTerm> terms;
  std::vector<toy::TokenId> ids;
  for (std::size_t item = 0; item < batch.size(); ++item) {
    const auto& traj = *batch[item];
    ids.clear();
    for (std::size_t i = 0; i < traj.tokens.size(); ++i) {
      const auto tok = vocab.id(traj.tokens[i].text);
      if (is_policy_generated(traj.tokens[i], grammar)) {
        auto g = policy.grad_logprob(params, ids, tok);
        TokenTerm t;
        t.item = item;
        t.token = i;
        t.rows = std::move(g.rows);
        t.coef = std::move(g.coef);
        t.log_prob = g.log_prob;
        t.ref_log_prob = ref ? policy.log_prob(*ref, ids, tok) : g.log_prob;
        terms.push_back(std::move(t));
      }
      ids.push_back(tok);
    }
  }
  return terms;
}

void SparseGradient::add(const TokenTerm& term, double scale) {
  if (scale == 0.0) return;
  for (auto r : term.rows) {
    auto& row = rows_[r];
    if (row.empty()) row.assign(vocab_size_, 0.0);
    for (std::size_t v = 0; v < vocab_size_; ++v) row[v] += scale * term.coef[v];
  }
}

void SparseGradient::scale(double s) {
  for (auto& [r, row] : rows_) {
    for (auto& v : row) v *= s;
  }
}

std::vector<std::uint32_t> SparseGradient::sorted_rows() const {
  std::vector<std::uint32_t> keys;
  keys.reserve(rows_.size());
  for (const auto& [r, row] : rows_) keys.push_back(r);
  std::sort(keys.begin(), keys.end());
  return keys;
}

const std::vector<double>* SparseGradient::row(std::uint32_t r) const {
  auto it = rows_.find(r);
  return it == rows_.end() ? nullptr : &it->second;
}

double SparseGradient::dot(const SparseGradient& other) const {
  double s = 0.0;
  for (auto r : sorted_rows()) {
    const auto* b = other.row(r);
    if (!b) continue;
    const auto& a = rows_.at(r);
    for (std::size_t v = 0; v < vocab_size_; ++v) s += a[v] * (*b)[v];
  }
  return s;
}

bool SparseGradient::all_finite() const {
  for (const auto& [r, row] : rows_) {
    for (double v : row) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

SparseGradient surrogate_gradient(const std::vector<TokenTerm>& terms,
                                  const std::vector<std::vector<double>>& advantages,
                                  double kl_coeff, std::size_t vocab_size, UpdateReport* report) {
  SparseGradient grad(vocab_size);
  double loss = 0.0;
  double kl = 0.0;
  for (const auto& t : terms) {
    if (t.item >= advantages.size() || t.token >= advantages[t.item].size()) {
      throw ConsistencyError("advantages do not cover the update batch");
    }
    const double a = advantages[t.item][t.token];
    if (!std::isfinite(a)) throw NumericalError("non-finite shaped advantage in update batch");
    const double d = t.ref_log_prob - t.log_prob;
    const double k3 = kl_token_penalty(t.log_prob, t.ref_log_prob);
    grad.add(t, a - kl_coeff * (-std::expm1(d)));
    loss += -a * t.log_prob + kl_coeff * k3;
    kl += k3;
  }
  const double n = static_cast<double>(terms.size());
  if (!terms.empty()) grad.scale(1.0 / n);
  if (report) {
    report->tokens = terms.size();
    report->mean_loss = terms.empty() ? 0.0 : loss / n;
    report->kl_mean = terms.empty() ? 0.0 : kl / n;
    report->grad_norm = grad.norm();
  }
  return grad;
}

UpdateReport apply_update(PolicyParams& params, const SparseGradient& gradient, double lr) {
  if (!gradient.all_finite()) throw NumericalError("policy gradient is not finite; step aborted");
  if (gradient.vocab_size() != params.vocab_size()) {
    throw ConsistencyError("gradient and parameters disagree on the vocabulary size");
  }
  for (auto r : gradient.sorted_rows()) {
    if (r >= params.dimension()) throw ConsistencyError("gradient row outside the feature space");
    const auto& g = *gradient.row(r);
    auto row = params.row(r);
    for (std::size_t v = 0; v < row.size(); ++v) row[v] += lr * g[v];
  }
  UpdateReport rep;
  rep.grad_norm = gradient.norm();
  return rep;
}

UpdateReport policy_update(PolicyParams& params, const SoftmaxPolicy& policy,
                           std::span<const Trajectory* const> batch,
                           const std::vector<std::vector<double>>& advantages, double lr,
                           double kl_coeff, const PolicyParams& ref, int step,
                           const TagGrammar& grammar) {
  if (batch.empty()) throw ConfigError("policy update needs a non-empty batch");
  const auto terms = token_terms(policy, params, &ref, batch, grammar);
  UpdateReport rep;
  const auto grad = surrogate_gradient(terms, advantages, kl_coeff, params.vocab_size(), &rep);
  apply_update(params, grad, lr);
  rep.step = step;
  return rep;
}

}  // namespace stepopsd
