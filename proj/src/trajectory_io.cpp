#include "stepopsd/trajectory_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "stepopsd/errors.hpp"

namespace stepopsd {

using nlohmann::json;

namespace {

// Schema errors are reported against field paths; their byte offset is the
// start of the line.
[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw ParseError("field '" + path + "': " + what, 0);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

std::string get_string(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) schema_error(path + "." + key, "expected a string");
  return v.get<std::string>();
}

double get_number(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number()) schema_error(path + "." + key, "expected a number");
  return v.get<double>();
}

long long get_integer(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number_integer()) schema_error(path + "." + key, "expected an integer");
  return v.get<long long>();
}

bool get_bool(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_boolean()) schema_error(path + "." + key, "expected a boolean");
  return v.get<bool>();
}

const json& get_array(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_array()) schema_error(path + "." + key, "expected an array");
  return v;
}

}  // namespace

json group_to_json(const RolloutGroup& group) {
  json members = json::array();
  for (const auto& m : group.members) {
    json tokens = json::array();
    for (const auto& t : m.tokens) {
      tokens.push_back({{"text", t.text},
                        {"role", std::string(role_name(t.role))},
                        {"logprob", t.student_logprob},
                        {"turn", t.turn}});
    }
    members.push_back({{"id", m.id},
                       {"reward", m.reward},
                       {"success", m.success},
                       {"invalid_action_count", m.invalid_action_count},
                       {"tokens", std::move(tokens)}});
  }
  return {{"group_id", group.group_id}, {"prompt", group.prompt}, {"members", std::move(members)}};
}

RolloutGroup group_from_json(const json& j) {
  RolloutGroup group;
  group.group_id = get_string(j, "group_id", "");
  group.prompt = get_string(j, "prompt", "");
  const auto& members = get_array(j, "members", "");
  for (std::size_t i = 0; i < members.size(); ++i) {
    const std::string mpath = "members[" + std::to_string(i) + "]";
    const auto& mj = members[i];
    Trajectory traj;
    traj.id = get_string(mj, "id", mpath);
    traj.reward = get_number(mj, "reward", mpath);
    traj.success = get_bool(mj, "success", mpath);
    traj.invalid_action_count = static_cast<int>(get_integer(mj, "invalid_action_count", mpath));
    const auto& tokens = get_array(mj, "tokens", mpath);
    traj.tokens.reserve(tokens.size());
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      const std::string tpath = mpath + ".tokens[" + std::to_string(k) + "]";
      const auto& tj = tokens[k];
      TokenRecord rec;
      rec.text = get_string(tj, "text", tpath);
      const auto role_text = get_string(tj, "role", tpath);
      const auto role = parse_role(role_text);
      if (!role) schema_error(tpath + ".role", "unknown role '" + role_text + "'");
      rec.role = *role;
      rec.student_logprob = get_number(tj, "logprob", tpath);
      rec.turn = static_cast<int>(get_integer(tj, "turn", tpath));
      traj.tokens.push_back(std::move(rec));
    }
    group.members.push_back(std::move(traj));
  }
  return group;
}

std::string serialize_group(const RolloutGroup& group) { return group_to_json(group).dump(); }

RolloutGroup deserialize_group(std::string_view line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte, line_number);
  }
  try {
    return group_from_json(j);
  } catch (const ParseError& e) {
    if (line_number == 0) throw;
    throw ParseError(e.detail(), e.byte_offset(), line_number);
  }
}

std::vector<RolloutGroup> read_groups(std::istream& in) {
  std::vector<RolloutGroup> groups;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    groups.push_back(deserialize_group(line, line_number));
  }
  return groups;
}

std::vector<RolloutGroup> read_groups_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rollout file '" + path + "'");
  return read_groups(in);
}

void write_groups(std::ostream& out, const std::vector<RolloutGroup>& groups) {
  for (const auto& g : groups) out << serialize_group(g) << '\n';
}

void write_groups_file(const std::string& path, const std::vector<RolloutGroup>& groups) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write rollout file '" + path + "'");
  write_groups(out, groups);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace stepopsd
