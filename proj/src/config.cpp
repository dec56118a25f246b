#include "stepopsd/config.hpp"

#include <fstream>
#include <set>

#include "stepopsd/errors.hpp"

namespace stepopsd {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + key + "' has the wrong type");
  }
}

}  // namespace

ExtractionMode RunConfig::resolved_mode() const {
  if (extraction_mode) return *extraction_mode;
  return toy::make_environment(env)->default_extraction_mode();
}

void RunConfig::validate() const {
  shaping.validate();
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (group_size < 2) throw ConfigError("group_size must be at least 2");
  if (batch_tasks < 1) throw ConfigError("batch_tasks must be at least 1");
  if (max_turns < 0) throw ConfigError("max_turns must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (kl_coeff < 0.0) throw ConfigError("kl_coeff must be non-negative");
  if (invalid_penalty < 0.0) throw ConfigError("invalid_penalty must be non-negative");
  if (snapshot_every < 0) throw ConfigError("snapshot_every must be non-negative");
  const auto d = policy.dimension;
  if (d == 0 || (d & (d - 1)) != 0) throw ConfigError("policy.dimension must be a power of two");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j,
                 {"env", "seed", "steps", "group_size", "batch_tasks", "max_turns",
                  "learning_rate", "kl_coeff", "invalid_penalty", "shaping_enabled",
                  "extraction_mode", "shaping", "policy", "warm_start", "snapshot_every",
                  "measure_alignment", "output_dir"},
                 "");
  RunConfig c;
  if (j.contains("env")) {
    const auto name = j.at("env").is_string() ? j.at("env").get<std::string>() : "";
    const auto kind = toy::parse_env_kind(name);
    if (!kind) throw ConfigError("unknown env '" + name + "'");
    c.env = *kind;
  }
  read(j, "seed", c.seed, "");
  read(j, "steps", c.steps, "");
  read(j, "group_size", c.group_size, "");
  read(j, "batch_tasks", c.batch_tasks, "");
  read(j, "max_turns", c.max_turns, "");
  read(j, "learning_rate", c.learning_rate, "");
  read(j, "kl_coeff", c.kl_coeff, "");
  read(j, "invalid_penalty", c.invalid_penalty, "");
  read(j, "shaping_enabled", c.shaping_enabled, "");
  read(j, "snapshot_every", c.snapshot_every, "");
  read(j, "measure_alignment", c.measure_alignment, "");
  read(j, "output_dir", c.output_dir, "");
  if (j.contains("extraction_mode") && !j.at("extraction_mode").is_null()) {
    const auto name = j.at("extraction_mode").is_string() ? j.at("extraction_mode").get<std::string>() : "";
    const auto mode = parse_extraction_mode(name);
    if (!mode) throw ConfigError("unknown extraction_mode '" + name + "'");
    c.extraction_mode = *mode;
  }
  if (j.contains("shaping")) {
    const auto& s = j.at("shaping");
    reject_unknown(s,
                   {"lambda_mix_initial", "alpha_clip", "decay_horizon", "normalization",
                    "teacher_refresh_interval"},
                   "shaping.");
    read(s, "lambda_mix_initial", c.shaping.lambda_mix_initial, "shaping.");
    read(s, "alpha_clip", c.shaping.alpha_clip, "shaping.");
    read(s, "decay_horizon", c.shaping.decay_horizon, "shaping.");
    read(s, "teacher_refresh_interval", c.shaping.teacher_refresh_interval, "shaping.");
    if (s.contains("normalization")) {
      const auto name = s.at("normalization").is_string() ? s.at("normalization").get<std::string>() : "";
      const auto n = parse_normalization(name);
      if (!n) throw ConfigError("unknown shaping.normalization '" + name + "'");
      c.shaping.normalization = *n;
    }
  }
  if (j.contains("policy")) {
    const auto& p = j.at("policy");
    reject_unknown(p,
                   {"dimension", "hash_seed", "window", "max_ngram", "turn_buckets",
                    "prompt_features", "hindsight_copy_bonus", "induction_max_match"},
                   "policy.");
    read(p, "dimension", c.policy.dimension, "policy.");
    read(p, "hash_seed", c.policy.hash_seed, "policy.");
    read(p, "window", c.policy.features.window, "policy.");
    read(p, "max_ngram", c.policy.features.max_ngram, "policy.");
    read(p, "turn_buckets", c.policy.features.turn_buckets, "policy.");
    read(p, "prompt_features", c.policy.features.prompt_features, "policy.");
    read(p, "hindsight_copy_bonus", c.policy.features.hindsight_copy_bonus, "policy.");
    read(p, "induction_max_match", c.policy.features.induction_max_match, "policy.");
  }
  if (j.contains("warm_start")) {
    const auto& w = j.at("warm_start");
    reject_unknown(w, {"epochs", "tasks_per_epoch", "noise", "learning_rate", "seed"}, "warm_start.");
    read(w, "epochs", c.warm_start.epochs, "warm_start.");
    read(w, "tasks_per_epoch", c.warm_start.tasks_per_epoch, "warm_start.");
    read(w, "noise", c.warm_start.noise, "warm_start.");
    read(w, "learning_rate", c.warm_start.learning_rate, "warm_start.");
    read(w, "seed", c.warm_start.seed, "warm_start.");
  }
  c.validate();
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["env"] = std::string(toy::env_kind_name(c.env));
  j["seed"] = c.seed;
  j["steps"] = c.steps;
  j["group_size"] = c.group_size;
  j["batch_tasks"] = c.batch_tasks;
  j["max_turns"] = c.max_turns;
  j["learning_rate"] = c.learning_rate;
  j["kl_coeff"] = c.kl_coeff;
  j["invalid_penalty"] = c.invalid_penalty;
  j["shaping_enabled"] = c.shaping_enabled;
  j["extraction_mode"] = c.extraction_mode
                             ? json(std::string(extraction_mode_name(*c.extraction_mode)))
                             : json(nullptr);
  j["shaping"] = {{"lambda_mix_initial", c.shaping.lambda_mix_initial},
                  {"alpha_clip", c.shaping.alpha_clip},
                  {"decay_horizon", c.shaping.decay_horizon},
                  {"normalization", std::string(normalization_name(c.shaping.normalization))},
                  {"teacher_refresh_interval", c.shaping.teacher_refresh_interval}};
  const auto& f = c.policy.features;
  j["policy"] = {{"dimension", c.policy.dimension},
                 {"hash_seed", c.policy.hash_seed},
                 {"window", f.window},
                 {"max_ngram", f.max_ngram},
                 {"turn_buckets", f.turn_buckets},
                 {"prompt_features", f.prompt_features},
                 {"hindsight_copy_bonus", f.hindsight_copy_bonus},
                 {"induction_max_match", f.induction_max_match}};
  const auto& w = c.warm_start;
  j["warm_start"] = {{"epochs", w.epochs},
                     {"tasks_per_epoch", w.tasks_per_epoch},
                     {"noise", w.noise},
                     {"learning_rate", w.learning_rate},
                     {"seed", w.seed}};
  j["snapshot_every"] = c.snapshot_every;
  j["measure_alignment"] = c.measure_alignment;
  j["output_dir"] = c.output_dir;
  return j;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config '") + path + "': " + e.what(), e.byte);
  }
  return run_config_from_json(j);
}

}  // namespace stepopsd
