#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "stepopsd/step_extractor.hpp"
#include "stepopsd/toy/policy.hpp"
#include "stepopsd/trajectory.hpp"

namespace stepopsd {

using toy::SoftmaxPolicy;

inline constexpr double kAdvantageEps = 1e-8;

double apply_reward_penalties(const Trajectory& traj, double invalid_coeff);

struct GroupStats {
  double mean = 0.0;
  double std = 0.0;  // population
  std::vector<double> advantages;
};

// Throws ConfigError for fewer than two rewards.
GroupStats group_stats(std::span<const double> rewards);
std::vector<double> group_advantage(std::span<const double> rewards);

// `a` on policy-generated tokens, 0 on environment tokens.
std::vector<double> broadcast_token_advantages(const Trajectory& traj, double a,
                                               const TagGrammar& grammar = {});

// k3 estimator exp(d) - d - 1 with d = logp_ref - logp_policy.
double kl_token_penalty(double logp_policy, double logp_ref);

// Gradient of log pi at one policy token of one trajectory, plus the
// reference log-prob used by the KL term.
struct TokenTerm {
  std::size_t item = 0;   // trajectory index in the batch
  std::size_t token = 0;  // token index in the trajectory
  std::vector<std::uint32_t> rows;
  std::vector<double> coef;
  double log_prob = 0.0;
  double ref_log_prob = 0.0;
};

// One TokenTerm per policy-generated token of every trajectory. `ref` may be
// null, in which case ref_log_prob = log_prob.
std::vector<TokenTerm> token_terms(const SoftmaxPolicy& policy, const PolicyParams& params,
                                   const PolicyParams* ref,
                                   std::span<const Trajectory* const> batch,
                                   const TagGrammar& grammar);

// Sparse gradient over weight rows.
class SparseGradient {
 public:
  explicit SparseGradient(std::size_t vocab_size) : vocab_size_(vocab_size) {}

  void add(const TokenTerm& term, double scale);
  void scale(double s);

  double dot(const SparseGradient& other) const;
  double norm() const { return std::sqrt(dot(*this)); }
  bool all_finite() const;
  std::vector<std::uint32_t> sorted_rows() const;
  const std::vector<double>* row(std::uint32_t r) const;
  std::size_t vocab_size() const { return vocab_size_; }

 private:
  std::size_t vocab_size_;
  std::unordered_map<std::uint32_t, std::vector<double>> rows_;
};

struct UpdateReport {
  int step = 0;
  double mean_loss = 0.0;
  double grad_norm = 0.0;
  double kl_mean = 0.0;
  std::size_t tokens = 0;
};

// Ascent direction of mean over tokens of [A~ * log pi - kl * k3]:
// mean of (A~ - kl * (1 - exp(d))) * grad log pi. `advantages[i]` holds the
// per-token (shaped) advantages of batch item i.
SparseGradient surrogate_gradient(const std::vector<TokenTerm>& terms,
                                  const std::vector<std::vector<double>>& advantages,
                                  double kl_coeff, std::size_t vocab_size, UpdateReport* report);

// One plain gradient step, in place. Throws NumericalError and leaves
// `params` untouched when the gradient is not finite.
UpdateReport apply_update(PolicyParams& params, const SparseGradient& gradient, double lr);

UpdateReport policy_update(PolicyParams& params, const SoftmaxPolicy& policy,
                           std::span<const Trajectory* const> batch,
                           const std::vector<std::vector<double>>& advantages, double lr,
                           double kl_coeff, const PolicyParams& ref, int step,
                           const TagGrammar& grammar);

}  // namespace stepopsd
