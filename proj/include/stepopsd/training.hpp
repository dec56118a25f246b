#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stepopsd/config.hpp"
#include "stepopsd/diagnostics.hpp"
#include "stepopsd/toy/policy_params.hpp"

namespace stepopsd {

struct MetricsRecord {
  int step = 0;
  double success_rate = 0.0;
  double mean_reward = 0.0;           // environment reward
  double mean_adjusted_reward = 0.0;  // after the invalid-action penalty
  double lambda = 0.0;
  DeltaStats delta;
  double mean_abs_psi_minus_1 = 0.0;  // over shaped step tokens
  double clip_saturation = 0.0;       // fraction of shaped step tokens hitting the clip
  int groups_skipped_no_peer = 0;
  int trajectories_shaped = 0;
  int dropped_numerical = 0;
  double trajectory_length = 0.0;
  double invalid_rate = 0.0;  // invalid actions per agent turn
  std::optional<double> cosine;
  bool proportional = true;
  double max_proportionality_error = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double kl_mean = 0.0;
  std::size_t tokens = 0;
  int teacher_step = 0;
  std::string policy_digest;   // parameters used for this step's rollouts
  std::string teacher_digest;
  std::string param_digest;    // after the update

  nlohmann::json to_json() const;
  static MetricsRecord from_json(const nlohmann::json& j);
};

struct TrainingHooks {
  bool write_files = true;
  std::function<void(const MetricsRecord&)> on_step;
};

struct TrainingResult {
  std::vector<MetricsRecord> metrics;
  toy::PolicyParams params;
};

// Builds the policy parameters a run starts from (zero weights plus the
// configured warm start).
toy::PolicyParams initial_params(const RunConfig& config);

// rollout -> penalties -> group advantage -> extraction -> contexts ->
// rescoring -> shaping -> update, once per step. With write_files, the output
// directory receives config.json, metrics.jsonl, periodic params_step<N>.bin
// and params_final.bin; an unusable directory fails before step 0.
TrainingResult run_training(const RunConfig& config, const TrainingHooks& hooks = {});

std::vector<MetricsRecord> read_metrics_file(const std::string& path);

}  // namespace stepopsd
