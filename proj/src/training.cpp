#include "stepopsd/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "stepopsd/errors.hpp"
#include "stepopsd/grpo.hpp"
#include "stepopsd/hindsight.hpp"
#include "stepopsd/pipeline.hpp"
#include "stepopsd/toy/rollout.hpp"
#include "stepopsd/toy/warm_start.hpp"

namespace stepopsd {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTaskStream = 0x7a5c;

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

int agent_turns(const Trajectory& traj) {
  int turns = 0;
  for (const auto& t : traj.tokens) turns = std::max(turns, t.turn);
  return turns;
}

}  // namespace

json MetricsRecord::to_json() const {
  return json{{"step", step},
              {"success_rate", success_rate},
              {"mean_reward", mean_reward},
              {"mean_adjusted_reward", mean_adjusted_reward},
              {"lambda", lambda},
              {"std_delta", optional_number(delta.stddev())},
              {"delta_count", delta.count},
              {"delta_mean", delta.count ? json(delta.mean) : json(nullptr)},
              {"delta_m2", delta.m2},
              {"mean_abs_psi_minus_1", mean_abs_psi_minus_1},
              {"clip_saturation", clip_saturation},
              {"groups_skipped_no_peer", groups_skipped_no_peer},
              {"trajectories_shaped", trajectories_shaped},
              {"dropped_numerical", dropped_numerical},
              {"trajectory_length", trajectory_length},
              {"invalid_rate", invalid_rate},
              {"cosine", optional_number(cosine)},
              {"proportional", proportional},
              {"max_proportionality_error", max_proportionality_error},
              {"loss", loss},
              {"grad_norm", grad_norm},
              {"kl_mean", kl_mean},
              {"tokens", tokens},
              {"teacher_step", teacher_step},
              {"policy_digest", policy_digest},
              {"teacher_digest", teacher_digest},
              {"param_digest", param_digest}};
}

MetricsRecord MetricsRecord::from_json(const json& j) {
  MetricsRecord m;
  try {
    m.step = j.at("step").get<int>();
    m.success_rate = j.at("success_rate").get<double>();
    m.mean_reward = j.at("mean_reward").get<double>();
    m.mean_adjusted_reward = j.at("mean_adjusted_reward").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.delta.count = j.at("delta_count").get<std::size_t>();
    m.delta.mean = j.at("delta_mean").is_null() ? 0.0 : j.at("delta_mean").get<double>();
    m.delta.m2 = j.at("delta_m2").get<double>();
    m.mean_abs_psi_minus_1 = j.at("mean_abs_psi_minus_1").get<double>();
    m.clip_saturation = j.at("clip_saturation").get<double>();
    m.groups_skipped_no_peer = j.at("groups_skipped_no_peer").get<int>();
    m.trajectories_shaped = j.at("trajectories_shaped").get<int>();
    m.dropped_numerical = j.at("dropped_numerical").get<int>();
    m.trajectory_length = j.at("trajectory_length").get<double>();
    m.invalid_rate = j.at("invalid_rate").get<double>();
    if (!j.at("cosine").is_null()) m.cosine = j.at("cosine").get<double>();
    m.proportional = j.at("proportional").get<bool>();
    m.max_proportionality_error = j.at("max_proportionality_error").get<double>();
    m.loss = j.at("loss").get<double>();
    m.grad_norm = j.at("grad_norm").get<double>();
    m.kl_mean = j.at("kl_mean").get<double>();
    m.tokens = j.at("tokens").get<std::size_t>();
    m.teacher_step = j.at("teacher_step").get<int>();
    m.policy_digest = j.at("policy_digest").get<std::string>();
    m.teacher_digest = j.at("teacher_digest").get<std::string>();
    m.param_digest = j.at("param_digest").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("metrics record: ") + e.what(), 0);
  }
  return m;
}

std::vector<MetricsRecord> read_metrics_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file '" + path + "'");
  std::vector<MetricsRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(MetricsRecord::from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ParseError(path + ": " + e.what(), e.byte, line_no);
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.detail(), 0, line_no);
    }
  }
  return out;
}

toy::PolicyParams initial_params(const RunConfig& config) {
  const auto env = toy::make_environment(config.env);
  toy::PolicyParams params(env->vocabulary(), config.policy.dimension, config.policy.hash_seed);
  if (config.warm_start.epochs > 0) {
    const toy::SoftmaxPolicy policy(env->vocabulary(), config.policy.features, env.get());
    toy::warm_start(*env, policy, params, config.warm_start);
  }
  return params;
}

TrainingResult run_training(const RunConfig& config, const TrainingHooks& hooks) {
  config.validate();
  namespace fs = std::filesystem;
  std::ofstream metrics_out;
  const fs::path out_dir(config.output_dir);
  if (hooks.write_files) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + config.output_dir + "': " + ec.message());
    metrics_out.open(out_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics_out) throw IoError("cannot write to output directory '" + config.output_dir + "'");
    std::ofstream cfg(out_dir / "config.json", std::ios::trunc);
    cfg << run_config_to_json(config).dump(2) << '\n';
    if (!cfg) throw IoError("cannot write config.json in '" + config.output_dir + "'");
  }

  const auto env = toy::make_environment(config.env);
  const toy::SoftmaxPolicy policy(env->vocabulary(), config.policy.features, env.get());
  const auto& grammar = env->tags();

  TrainingResult result{{}, initial_params(config)};
  auto& params = result.params;
  TeacherSnapshot teacher;

  GroupShapingOptions opts;
  opts.mode = config.resolved_mode();
  opts.grammar = grammar;
  opts.shaping = config.shaping;
  opts.invalid_coeff = config.invalid_penalty;
  opts.shaping_enabled = config.shaping_enabled;

  toy::RolloutOptions ro;
  ro.group_size = config.group_size;
  ro.max_turns = config.max_turns;

  for (int step = 0; step < config.steps; ++step) {
    teacher = maybe_refresh(teacher, params, step, config.shaping.teacher_refresh_interval);
    opts.lambda = config.shaping_enabled ? lambda_schedule(step, config.shaping) : 0.0;

    MetricsRecord rec;
    rec.step = step;
    rec.lambda = opts.lambda;
    rec.teacher_step = teacher.taken_at_step;
    rec.policy_digest = toy::hex_digest(params.digest());
    rec.teacher_digest = toy::hex_digest(teacher.params->digest());

    std::vector<RolloutGroup> groups;
    std::vector<GroupShaping> shaped;
    for (int b = 0; b < config.batch_tasks; ++b) {
      const auto key = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(config.batch_tasks) +
                       static_cast<std::uint64_t>(b);
      const std::uint64_t task_seed = toy::mix_seed(config.seed, kTaskStream, key) >> 32;
      groups.push_back(toy::rollout_group(*env, policy, params, task_seed, config.seed, key, ro,
                                          "s" + std::to_string(step) + "-g" + std::to_string(b)));
      shaped.push_back(shape_group(groups.back(), policy, *teacher.params, &params, opts));
    }

    std::vector<const Trajectory*> batch;
    std::vector<std::vector<double>> base_adv;
    std::vector<std::vector<double>> shaped_adv;
    std::size_t members = 0, successes = 0, turns = 0, invalid = 0, length = 0;
    std::size_t step_tokens = 0, saturated = 0;
    double reward = 0.0, adjusted = 0.0, psi_dev = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (shaped[g].skipped_no_peer) ++rec.groups_skipped_no_peer;
      rec.dropped_numerical += static_cast<int>(shaped[g].dropped_numerical);
      for (std::size_t i = 0; i < groups[g].members.size(); ++i) {
        const auto& traj = groups[g].members[i];
        const auto& ms = shaped[g].members[i];
        ++members;
        successes += traj.success ? 1 : 0;
        reward += traj.reward;
        adjusted += ms.adjusted_reward;
        turns += static_cast<std::size_t>(agent_turns(traj));
        invalid += static_cast<std::size_t>(traj.invalid_action_count);
        length += traj.tokens.size();
        if (ms.shaped) {
          ++rec.trajectories_shaped;
          for (const auto& gap : ms.gaps) {
            rec.delta.add(gap.delta);
            const auto& t = ms.tokens[gap.token_index];
            ++step_tokens;
            psi_dev += std::abs(t.psi - 1.0);
            if (t.w_normalized <= 1.0 - config.shaping.alpha_clip ||
                t.w_normalized >= 1.0 + config.shaping.alpha_clip) {
              ++saturated;
            }
          }
        }
        batch.push_back(&traj);
        base_adv.push_back(ms.base_advantages());
        shaped_adv.push_back(ms.shaped_advantages());
      }
    }
    const double n = static_cast<double>(members);
    rec.success_rate = static_cast<double>(successes) / n;
    rec.mean_reward = reward / n;
    rec.mean_adjusted_reward = adjusted / n;
    rec.trajectory_length = static_cast<double>(length) / n;
    rec.invalid_rate = turns ? static_cast<double>(invalid) / static_cast<double>(turns) : 0.0;
    if (step_tokens) {
      rec.mean_abs_psi_minus_1 = psi_dev / static_cast<double>(step_tokens);
      rec.clip_saturation = static_cast<double>(saturated) / static_cast<double>(step_tokens);
    }

    const auto terms = token_terms(policy, params, teacher.params.get(), batch, grammar);
    if (config.measure_alignment) {
      const auto align = measure_gradient_alignment(terms, base_adv, shaped_adv, params.vocab_size());
      rec.cosine = align.cosine;
      rec.proportional = align.proportional;
      rec.max_proportionality_error = align.max_proportionality_error;
    }
    UpdateReport rep;
    const auto grad = surrogate_gradient(terms, shaped_adv, config.kl_coeff, params.vocab_size(), &rep);
    apply_update(params, grad, config.learning_rate);
    rec.loss = rep.mean_loss;
    rec.grad_norm = rep.grad_norm;
    rec.kl_mean = rep.kl_mean;
    rec.tokens = rep.tokens;
    rec.param_digest = toy::hex_digest(params.digest());

    if (hooks.write_files) {
      metrics_out << rec.to_json().dump() << '\n';
      metrics_out.flush();
      if (config.snapshot_every > 0 && (step + 1) % config.snapshot_every == 0) {
        params.save_file((out_dir / ("params_step" + std::to_string(step + 1) + ".bin")).string());
      }
    }
    if (hooks.on_step) hooks.on_step(rec);
    result.metrics.push_back(std::move(rec));
  }

  if (hooks.write_files) {
    if (!metrics_out) throw IoError("failed writing metrics in '" + config.output_dir + "'");
    params.save_file((out_dir / "params_final.bin").string());
  }
  return result;
}

}  // namespace stepopsd
