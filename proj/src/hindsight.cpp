#include "stepopsd/hindsight.hpp"

#include <cstring>
#include <fstream>

#include "stepopsd/errors.hpp"
#include "stepopsd/toy/vocabulary.hpp"

namespace stepopsd {

namespace {
constexpr char kSnapshotMagic[8] = {'S', 'O', 'P', 'D', 'S', 'N', 'P', '1'};
}

void TeacherSnapshot::save(const std::string& path) const {
  if (!params) throw ConsistencyError("cannot save an empty teacher snapshot");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(kSnapshotMagic, sizeof kSnapshotMagic);
  const std::int64_t step = taken_at_step;
  out.write(reinterpret_cast<const char*>(&step), sizeof step);
  params->save(out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

TeacherSnapshot TeacherSnapshot::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[sizeof kSnapshotMagic];
  std::int64_t step = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&step), sizeof step);
  if (!in || std::memcmp(magic, kSnapshotMagic, sizeof magic) != 0) {
    throw ParseError("'" + path + "' is not a teacher snapshot", 0);
  }
  TeacherSnapshot snap;
  snap.params = std::make_shared<const PolicyParams>(PolicyParams::load(in));
  snap.taken_at_step = static_cast<int>(step);
  return snap;
}

TeacherSnapshot take_snapshot(const PolicyParams& params, int step) {
  return {std::make_shared<const PolicyParams>(params), step};
}

TeacherSnapshot maybe_refresh(const TeacherSnapshot& snapshot, const PolicyParams& current, int step,
                              int interval) {
  if (interval < 1) throw ConfigError("teacher refresh interval must be at least 1");
  if (step < 0) throw ConfigError("training step must be non-negative");
  if (step % interval == 0) return take_snapshot(current, step);
  return snapshot;
}

std::optional<std::size_t> select_peer(const RolloutGroup& group) {
  for (std::size_t i = 0; i < group.members.size(); ++i) {
    if (group.members[i].success) return i;
  }
  return std::nullopt;
}

std::vector<std::string> render_hindsight(const Trajectory& peer, const TagGrammar& grammar) {
  std::vector<std::string> out{std::string(toy::kHindsightOpen)};
  for (const auto& tok : peer.tokens) {
    if (is_policy_generated(tok, grammar)) out.push_back(tok.text);
  }
  out.emplace_back(toy::kHindsightClose);
  return out;
}

HindsightContext build_contexts(const Trajectory& traj, const StepSegment& segment,
                                const Trajectory* peer, const TagGrammar& grammar) {
  if (segment.span.end() > traj.tokens.size()) {
    throw ConsistencyError("segment [" + std::to_string(segment.span.start()) + ", " +
                           std::to_string(segment.span.end()) + ") exceeds trajectory '" +
                           traj.id + "' of length " + std::to_string(traj.tokens.size()));
  }
  HindsightContext ctx;
  ctx.student_context.reserve(segment.span.start());
  for (std::size_t i = 0; i < segment.span.start(); ++i) {
    ctx.student_context.push_back(traj.tokens[i].text);
  }
  if (!traj.success && peer != nullptr) {
    ctx.hindsight = render_hindsight(*peer, grammar);
    ctx.teacher_context = *ctx.hindsight;
    ctx.teacher_context.insert(ctx.teacher_context.end(), ctx.student_context.begin(),
                               ctx.student_context.end());
    ctx.shaped = true;
  } else {
    ctx.teacher_context = ctx.student_context;
  }
  return ctx;
}

}  // namespace stepopsd
