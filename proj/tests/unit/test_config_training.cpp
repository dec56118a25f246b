#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stepopsd/config.hpp"
#include "stepopsd/errors.hpp"
#include "stepopsd/training.hpp"

using namespace stepopsd;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("stepopsd_unit_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig small_config() {
  RunConfig c;
  c.steps = 4;
  c.batch_tasks = 2;
  c.group_size = 4;
  c.warm_start.epochs = 1;
  c.warm_start.tasks_per_epoch = 20;
  c.policy.dimension = 1U << 12;
  c.snapshot_every = 2;
  return c;
}

}  // namespace

TEST_CASE("default run config carries the training hyperparameters") {
  RunConfig c;
  CHECK(c.group_size == 8);
  CHECK(c.kl_coeff == 0.01);
  CHECK(c.invalid_penalty == 0.1);
  CHECK(c.shaping.lambda_mix_initial == 0.2);
  CHECK(c.shaping.decay_horizon == 50);
  CHECK(c.shaping.alpha_clip == 0.2);
  CHECK(c.shaping.teacher_refresh_interval == 10);
  CHECK(c.resolved_mode() == ExtractionMode::kActionOnly);
  c.env = toy::EnvKind::kFactChain;
  CHECK(c.resolved_mode() == ExtractionMode::kCleanStepNoObservation);
  c.extraction_mode = ExtractionMode::kActionOnly;
  CHECK(c.resolved_mode() == ExtractionMode::kActionOnly);
  CHECK_NOTHROW(RunConfig{}.validate());
}

TEST_CASE("config JSON round-trips and rejects unknown keys") {
  auto c = small_config();
  c.env = toy::EnvKind::kFactChain;
  c.shaping.normalization = Normalization::kNone;
  c.extraction_mode = ExtractionMode::kActionOnly;
  const auto j = run_config_to_json(c);
  CHECK(run_config_to_json(run_config_from_json(j)) == j);
  auto bad = j;
  bad["shaping"]["lambda"] = 0.3;
  CHECK_THROWS_AS(run_config_from_json(bad), ConfigError);
  bad = j;
  bad["env"] = "alfworld";
  CHECK_THROWS_AS(run_config_from_json(bad), ConfigError);
  bad = j;
  bad["steps"] = "many";
  CHECK_THROWS_AS(run_config_from_json(bad), ConfigError);
}

TEST_CASE("validation rejects out-of-range values") {
  RunConfig c;
  c.group_size = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.policy.dimension = 1000;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.shaping.teacher_refresh_interval = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("training writes metrics and snapshots and is reproducible") {
  const auto dir = scratch_dir("train");
  auto c = small_config();
  c.output_dir = dir.string();
  const auto a = run_training(c);
  REQUIRE(a.metrics.size() == 4);
  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "params_step2.bin"));
  CHECK(fs::exists(dir / "params_final.bin"));
  const auto read = read_metrics_file((dir / "metrics.jsonl").string());
  REQUIRE(read.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(read[i].to_json() == a.metrics[i].to_json());
  CHECK(toy::PolicyParams::load_file((dir / "params_final.bin").string()) == a.params);
  CHECK(load_run_config((dir / "config.json").string()).steps == 4);

  std::ifstream f1(dir / "metrics.jsonl");
  std::stringstream first;
  first << f1.rdbuf();
  const auto b = run_training(c);
  std::ifstream f2(dir / "metrics.jsonl");
  std::stringstream second;
  second << f2.rdbuf();
  CHECK(first.str() == second.str());
  CHECK(a.params == b.params);
  fs::remove_all(dir);
}

TEST_CASE("metrics carry the schedule and the teacher refresh") {
  auto c = small_config();
  c.steps = 12;
  c.batch_tasks = 1;
  c.shaping.decay_horizon = 8;
  c.shaping.teacher_refresh_interval = 5;
  TrainingHooks hooks;
  hooks.write_files = false;
  const auto r = run_training(c, hooks);
  for (const auto& m : r.metrics) {
    CHECK(m.lambda == doctest::Approx(lambda_schedule(m.step, c.shaping)));
    CHECK(m.teacher_step == (m.step / 5) * 5);
    CHECK(m.success_rate >= 0.0);
    CHECK(m.success_rate <= 1.0);
    if (m.step > 0) CHECK(m.policy_digest == r.metrics[static_cast<std::size_t>(m.step - 1)].param_digest);
  }
}

TEST_CASE("an unusable output directory fails before training") {
  const auto dir = scratch_dir("blocked");
  fs::create_directories(dir.parent_path());
  { std::ofstream(dir.string()) << "file, not a directory"; }
  auto c = small_config();
  c.output_dir = (dir / "sub").string();
  int steps_seen = 0;
  TrainingHooks hooks;
  hooks.on_step = [&](const MetricsRecord&) { ++steps_seen; };
  CHECK_THROWS_AS(run_training(c, hooks), IoError);
  CHECK(steps_seen == 0);
  fs::remove_all(dir);
}

TEST_CASE("metrics file errors carry the line number") {
  const auto dir = scratch_dir("metrics");
  fs::create_directories(dir);
  MetricsRecord m;
  {
    std::ofstream out(dir / "m.jsonl");
    out << m.to_json().dump() << "\n{\"step\": \n";
  }
  try {
    read_metrics_file((dir / "m.jsonl").string());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(read_metrics_file((dir / "missing.jsonl").string()), IoError);
  fs::remove_all(dir);
}
