#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stepopsd {

enum class Role { kObservation, kAction, kReasoning, kAnswer, kStructural };

std::string_view role_name(Role role);
std::optional<Role> parse_role(std::string_view name);

struct TokenRecord {
  std::string text;
  Role role = Role::kObservation;
  double student_logprob = 0.0;  // nats, <= 0
  int turn = 0;

  bool operator==(const TokenRecord&) const = default;
};

struct Trajectory {
  std::string id;
  std::vector<TokenRecord> tokens;
  double reward = 0.0;  // environment reward before penalties
  bool success = false;
  int invalid_action_count = 0;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const Trajectory&) const = default;
};

struct RolloutGroup {
  std::string group_id;
  std::string prompt;
  std::vector<Trajectory> members;

  bool operator==(const RolloutGroup&) const = default;
};

// Half-open token interval [start, end). Construction rejects empty or
// inverted intervals with std::out_of_range.
class Span {
 public:
  Span(std::size_t start, std::size_t end);

  std::size_t start() const { return start_; }
  std::size_t end() const { return end_; }
  std::size_t length() const { return end_ - start_; }
  bool contains(std::size_t index) const { return index >= start_ && index < end_; }

  bool operator==(const Span&) const = default;

 private:
  std::size_t start_;
  std::size_t end_;
};

struct Violation {
  std::optional<std::size_t> token_index;
  std::string message;
};

// Report-style validation; an empty result means the trajectory is valid.
std::vector<Violation> validate_trajectory(const Trajectory& traj, double success_reward = 1.0);

// Throws std::out_of_range when the span does not fit the trajectory.
std::vector<TokenRecord> token_slice(const Trajectory& traj, const Span& span);

std::vector<std::string> token_texts(std::span<const TokenRecord> tokens);

}  // namespace stepopsd
