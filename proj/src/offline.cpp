#include "stepopsd/offline.hpp"

#include <filesystem>
#include <fstream>

#include "stepopsd/errors.hpp"
#include "stepopsd/trajectory_io.hpp"

namespace stepopsd {

using nlohmann::json;

json shaped_group_json(const RolloutGroup& group, const GroupShaping& shaping, double lambda) {
  json j = group_to_json(group);
  j["skipped_no_peer"] = shaping.skipped_no_peer;
  j["peer"] = shaping.peer ? json(*shaping.peer) : json(nullptr);
  j["lambda"] = lambda;
  auto& members = j["members"];
  for (std::size_t i = 0; i < group.members.size(); ++i) {
    const auto& ms = shaping.members[i];
    auto& m = members[i];
    m["adjusted_reward"] = ms.adjusted_reward;
    m["advantage"] = ms.advantage;
    m["shaped"] = ms.shaped;
    m["dropped_numerical"] = ms.dropped_numerical;
    json segs = json::array();
    if (ms.shaped) {
      for (const auto& seg : ms.segments) {
        std::vector<int> mask;
        for (bool b : seg.included_mask) mask.push_back(b ? 1 : 0);
        segs.push_back({{"step", seg.step_index},
                        {"start", seg.span.start()},
                        {"end", seg.span.end()},
                        {"mask", mask}});
      }
    }
    m["segments"] = segs;
    auto& toks = m["tokens"];
    for (std::size_t t = 0; t < ms.tokens.size(); ++t) {
      const auto& sa = ms.tokens[t];
      auto& tok = toks[t];
      tok["step"] = sa.step_index ? json(*sa.step_index) : json(nullptr);
      tok["a_base"] = sa.a_base;
      tok["delta"] = sa.delta;
      tok["w_raw"] = sa.w_raw;
      tok["w_normalized"] = sa.w_normalized;
      tok["w_final"] = sa.w_final;
      tok["psi"] = sa.psi;
      tok["a_shaped"] = sa.a_shaped;
    }
  }
  return j;
}

OfflineSummary shape_offline(std::istream& in, const TeacherSnapshot& teacher,
                             const OfflineOptions& options, std::ostream& out) {
  if (teacher.empty()) throw ConfigError("offline shaping needs a teacher snapshot");
  options.shaping.validate();
  const auto env = toy::make_environment(options.env);
  if (teacher.params->vocabulary().tokens() != env->vocabulary()->tokens()) {
    throw ConsistencyError("teacher snapshot vocabulary does not match environment '" +
                           std::string(toy::env_kind_name(options.env)) + "'");
  }
  const toy::SoftmaxPolicy policy(teacher.params->shared_vocabulary(), options.policy, env.get());

  GroupShapingOptions opts;
  opts.mode = options.mode ? *options.mode : env->default_extraction_mode();
  opts.grammar = env->tags();
  opts.shaping = options.shaping;
  opts.lambda = lambda_schedule(options.step, options.shaping);
  opts.invalid_coeff = options.invalid_coeff;
  opts.recorded_student = true;

  OfflineSummary sum;
  sum.lambda = opts.lambda;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto group = deserialize_group(line, line_no);
    GroupShaping gs;
    try {
      gs = shape_group(group, policy, *teacher.params, nullptr, opts);
    } catch (const ParseError& e) {
      throw ParseError("group '" + group.group_id + "': " + e.detail(), e.byte_offset(), line_no);
    }
    ++sum.groups;
    sum.trajectories += group.members.size();
    if (gs.skipped_no_peer) ++sum.groups_skipped_no_peer;
    sum.dropped_numerical += gs.dropped_numerical;
    for (const auto& m : gs.members) sum.trajectories_shaped += m.shaped ? 1 : 0;
    out << shaped_group_json(group, gs, opts.lambda).dump() << '\n';
  }
  return sum;
}

OfflineSummary shape_offline_file(const std::string& rollout_path, const std::string& teacher_path,
                                  const OfflineOptions& options, const std::string& output_path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::equivalent(rollout_path, output_path, ec)) {
    throw ConfigError("offline shaping must not overwrite its input");
  }
  std::ifstream in(rollout_path);
  if (!in) throw IoError("cannot open rollout file '" + rollout_path + "'");
  const auto teacher = TeacherSnapshot::load(teacher_path);
  std::ofstream out(output_path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + output_path + "' for writing");
  auto sum = shape_offline(in, teacher, options, out);
  if (!out) throw IoError("failed writing '" + output_path + "'");
  return sum;
}

}  // namespace stepopsd
