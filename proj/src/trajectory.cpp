#include "stepopsd/trajectory.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace stepopsd {

namespace {

constexpr std::array<std::pair<Role, std::string_view>, 5> kRoleNames{{
    {Role::kObservation, "observation"},
    {Role::kAction, "action"},
    {Role::kReasoning, "reasoning"},
    {Role::kAnswer, "answer"},
    {Role::kStructural, "structural"},
}};

}  // namespace

std::string_view role_name(Role role) {
  for (const auto& [r, name] : kRoleNames) {
    if (r == role) return name;
  }
  return "unknown";
}

std::optional<Role> parse_role(std::string_view name) {
  for (const auto& [r, n] : kRoleNames) {
    if (n == name) return r;
  }
  return std::nullopt;
}

Span::Span(std::size_t start, std::size_t end) : start_(start), end_(end) {
  if (start >= end) {
    throw std::out_of_range("span [" + std::to_string(start) + ", " + std::to_string(end) +
                            ") is empty or inverted");
  }
}

std::vector<Violation> validate_trajectory(const Trajectory& traj, double success_reward) {
  std::vector<Violation> report;
  if (traj.tokens.empty()) {
    report.push_back({std::nullopt, "empty trajectory"});
  }
  if (!std::isfinite(traj.reward)) {
    report.push_back({std::nullopt, "reward is not finite"});
  }
  if (traj.success && traj.reward != success_reward) {
    report.push_back({std::nullopt, "success flag set but reward differs from the success reward"});
  }
  if (traj.invalid_action_count < 0) {
    report.push_back({std::nullopt, "negative invalid_action_count"});
  }
  for (std::size_t i = 0; i < traj.tokens.size(); ++i) {
    const auto& tok = traj.tokens[i];
    if (!(tok.student_logprob <= 0.0)) {
      report.push_back({i, "token " + std::to_string(i) + " has student_logprob > 0 or NaN"});
    }
    if (tok.turn < 0) {
      report.push_back({i, "token " + std::to_string(i) + " has a negative turn index"});
    }
    if (i > 0 && tok.turn < traj.tokens[i - 1].turn) {
      report.push_back({i, "token " + std::to_string(i) + " decreases the turn index"});
    }
  }
  return report;
}

std::vector<TokenRecord> token_slice(const Trajectory& traj, const Span& span) {
  if (span.end() > traj.tokens.size()) {
    throw std::out_of_range("span end " + std::to_string(span.end()) + " exceeds trajectory length " +
                            std::to_string(traj.tokens.size()));
  }
  return {traj.tokens.begin() + static_cast<std::ptrdiff_t>(span.start()),
          traj.tokens.begin() + static_cast<std::ptrdiff_t>(span.end())};
}

std::vector<std::string> token_texts(std::span<const TokenRecord> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

}  // namespace stepopsd
