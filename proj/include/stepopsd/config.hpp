#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "stepopsd/shaper.hpp"
#include "stepopsd/step_extractor.hpp"
#include "stepopsd/toy/environment.hpp"
#include "stepopsd/toy/policy.hpp"
#include "stepopsd/toy/warm_start.hpp"

namespace stepopsd {

struct PolicySettings {
  std::size_t dimension = 1U << 16;
  std::uint64_t hash_seed = 0x5eed;
  toy::PolicyConfig features;
};

struct RunConfig {
  toy::EnvKind env = toy::EnvKind::kLatchWorld;
  std::uint64_t seed = 1;
  int steps = 150;
  int group_size = 8;
  int batch_tasks = 8;
  int max_turns = 0;  // 0: environment default
  double learning_rate = 0.1;
  double kl_coeff = 0.01;
  double invalid_penalty = 0.1;
  bool shaping_enabled = true;
  std::optional<ExtractionMode> extraction_mode;  // environment default when absent
  ShapingConfig shaping;
  PolicySettings policy;
  toy::WarmStartConfig warm_start;
  int snapshot_every = 50;  // 0 disables periodic parameter snapshots
  bool measure_alignment = true;
  std::string output_dir = "runs/default";

  ExtractionMode resolved_mode() const;
  void validate() const;
};

// Unknown keys are rejected; absent keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig load_run_config(const std::string& path);

}  // namespace stepopsd
