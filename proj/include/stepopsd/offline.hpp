#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "stepopsd/hindsight.hpp"
#include "stepopsd/pipeline.hpp"
#include "stepopsd/toy/environment.hpp"
#include "stepopsd/toy/policy.hpp"

namespace stepopsd {

struct OfflineOptions {
  toy::EnvKind env = toy::EnvKind::kLatchWorld;
  std::optional<ExtractionMode> mode;  // environment default when absent
  ShapingConfig shaping;
  int step = 0;  // training step whose lambda is applied
  double invalid_coeff = 0.1;
  toy::PolicyConfig policy;
};

struct OfflineSummary {
  std::size_t groups = 0;
  std::size_t trajectories = 0;
  std::size_t groups_skipped_no_peer = 0;
  std::size_t trajectories_shaped = 0;
  std::size_t dropped_numerical = 0;
  double lambda = 0.0;
};

// Output line = the input group with shaping fields added: group
// `skipped_no_peer`/`peer`/`lambda`, member `adjusted_reward`/`advantage`/
// `shaped`/`segments`, and per token `step`, `a_base`, `delta`, `w_raw`,
// `w_normalized`, `w_final`, `psi`, `a_shaped`. Student log-probs are the
// recorded ones, so shaping an already shaped file reproduces it.
nlohmann::json shaped_group_json(const RolloutGroup& group, const GroupShaping& shaping,
                                 double lambda);

OfflineSummary shape_offline(std::istream& in, const TeacherSnapshot& teacher,
                             const OfflineOptions& options, std::ostream& out);

// Input is only read; output is written to a separate file.
OfflineSummary shape_offline_file(const std::string& rollout_path, const std::string& teacher_path,
                                  const OfflineOptions& options, const std::string& output_path);

}  // namespace stepopsd
