#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stepopsd/trajectory.hpp"

namespace stepopsd {

// Rollout-group JSONL: one group per line. Field names are part of the
// on-disk contract:
//   {"group_id", "prompt", "members": [{"id", "reward", "success",
//    "invalid_action_count", "tokens": [{"text", "role", "logprob", "turn"}]}]}
// Unknown fields are ignored on input.
nlohmann::json group_to_json(const RolloutGroup& group);
RolloutGroup group_from_json(const nlohmann::json& j);

std::string serialize_group(const RolloutGroup& group);

// Throws ParseError. `line_number` (1-based, 0 = unknown) is carried into the
// error for file-level diagnostics.
RolloutGroup deserialize_group(std::string_view line, std::size_t line_number = 0);

std::vector<RolloutGroup> read_groups(std::istream& in);
std::vector<RolloutGroup> read_groups_file(const std::string& path);
void write_groups(std::ostream& out, const std::vector<RolloutGroup>& groups);
void write_groups_file(const std::string& path, const std::vector<RolloutGroup>& groups);

}  // namespace stepopsd
