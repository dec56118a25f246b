#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "stepopsd/config.hpp"
#include "stepopsd/diagnostics.hpp"
#include "stepopsd/errors.hpp"
#include "stepopsd/grpo.hpp"
#include "stepopsd/hindsight.hpp"
#include "stepopsd/offline.hpp"
#include "stepopsd/pipeline.hpp"
#include "stepopsd/toy/rollout.hpp"
#include "stepopsd/training.hpp"
#include "stepopsd/trajectory_io.hpp"

using namespace stepopsd;

namespace {

constexpr int kVerificationFailed = static_cast<int>(ErrorCategory::kVerification);

struct CommonRunArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<std::string> out;
};

void add_run_args(CLI::App* cmd, CommonRunArgs& a) {
  cmd->add_option("-c,--config", a.config_path, "JSON run configuration");
  cmd->add_option("--seed", a.seed, "Override the run seed");
  cmd->add_option("--steps", a.steps, "Override the number of training steps");
  cmd->add_option("--out", a.out, "Override the output directory");
}

RunConfig resolve_config(const CommonRunArgs& a) {
  RunConfig c = a.config_path.empty() ? RunConfig{} : load_run_config(a.config_path);
  if (a.seed) c.seed = *a.seed;
  if (a.steps) c.steps = *a.steps;
  if (a.out) c.output_dir = *a.out;
  c.validate();
  return c;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("not an integer list: '" + s + "'");
    }
  }
  return out;
}

int cmd_train(const CommonRunArgs& a) {
  const auto config = resolve_config(a);
  TrainingHooks hooks;
  hooks.on_step = [](const MetricsRecord& m) {
    if (m.step % 10 == 0) {
      std::cerr << "step " << m.step << " success " << m.success_rate << " lambda " << m.lambda
                << " std_delta " << m.delta.stddev().value_or(0.0) << '\n';
    }
  };
  const auto result = run_training(config, hooks);
  std::cout << "trained " << result.metrics.size() << " steps; output in " << config.output_dir
            << "; final params " << toy::hex_digest(result.params.digest()) << '\n';
  return 0;
}

int cmd_rollout(const CommonRunArgs& a, int tasks, const std::string& out_path,
                const std::string& params_path, const std::string& teacher_out) {
  const auto config = resolve_config(a);
  const auto env = toy::make_environment(config.env);
  const toy::SoftmaxPolicy policy(env->vocabulary(), config.policy.features, env.get());
  const auto params = params_path.empty() ? initial_params(config) : toy::PolicyParams::load_file(params_path);
  toy::RolloutOptions ro;
  ro.group_size = config.group_size;
  ro.max_turns = config.max_turns;
  std::vector<RolloutGroup> groups;
  for (int t = 0; t < tasks; ++t) {
    const auto key = static_cast<std::uint64_t>(t);
    const std::uint64_t task_seed = toy::mix_seed(config.seed, 0x7a5c, key) >> 32;
    groups.push_back(toy::rollout_group(*env, policy, params, task_seed, config.seed, key, ro,
                                        "task" + std::to_string(t)));
  }
  write_groups_file(out_path, groups);
  if (!teacher_out.empty()) take_snapshot(params, 0).save(teacher_out);
  std::cout << "wrote " << groups.size() << " groups to " << out_path << '\n';
  return 0;
}

int cmd_shape(const CommonRunArgs& a, const std::string& input, const std::string& teacher,
              const std::string& output, int step) {
  const auto config = resolve_config(a);
  OfflineOptions o;
  o.env = config.env;
  o.mode = config.extraction_mode;
  o.shaping = config.shaping;
  o.step = step;
  o.invalid_coeff = config.invalid_penalty;
  o.policy = config.policy.features;
  const auto sum = shape_offline_file(input, teacher, o, output);
  std::cout << "groups " << sum.groups << " trajectories " << sum.trajectories << " shaped "
            << sum.trajectories_shaped << " skipped_no_peer " << sum.groups_skipped_no_peer
            << " dropped_numerical " << sum.dropped_numerical << " lambda " << sum.lambda << '\n';
  return 0;
}

int cmd_diagnose(const std::string& metrics, const std::string& windows) {
  const auto records = read_metrics_file(metrics);
  std::vector<int> steps;
  std::vector<DeltaStats> stats;
  for (const auto& r : records) {
    steps.push_back(r.step);
    stats.push_back(r.delta);
  }
  const auto out = diag_std_delta(steps, stats, parse_int_list(windows));
  std::cout << "window,count,mean,std_delta,empty\n";
  for (const auto& w : out) {
    std::cout << w.begin << '-' << (w.end ? std::to_string(*w.end) : std::string("end")) << ','
              << w.count << ',' << (w.mean ? std::to_string(*w.mean) : "") << ','
              << (w.stddev ? std::to_string(*w.stddev) : "") << ',' << (w.empty ? "yes" : "no")
              << '\n';
  }
  return 0;
}

bool verify_sign(std::size_t n, std::uint64_t seed) {
  const auto rep = verify_sign_preservation(n, seed);
  std::cout << "sign: cases " << rep.cases << " violations " << rep.violations << " min_psi "
            << rep.min_psi << (rep.passed() ? " PASS" : " FAIL") << '\n';
  if (rep.counterexample) std::cout << "  counterexample: " << *rep.counterexample << '\n';
  return rep.passed();
}

bool verify_variance(std::size_t n, std::uint64_t seed) {
  VarianceTestConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  const auto rep = verify_variance_bound(cfg);
  std::cout.precision(10);
  std::cout << "variance: var_base " << rep.var_base << " var_shaped " << rep.var_shaped
            << " ratio " << rep.ratio << (rep.passed() ? " PASS" : " FAIL") << '\n';
  return rep.passed();
}

bool verify_alignment(const CommonRunArgs& a) {
  auto config = resolve_config(a);
  const auto env = toy::make_environment(config.env);
  const toy::SoftmaxPolicy policy(env->vocabulary(), config.policy.features, env.get());
  const auto params = initial_params(config);
  toy::RolloutOptions ro;
  ro.group_size = config.group_size;
  GroupShapingOptions opts;
  opts.mode = config.resolved_mode();
  opts.grammar = env->tags();
  opts.shaping = config.shaping;
  opts.lambda = config.shaping.lambda_mix_initial;
  opts.invalid_coeff = config.invalid_penalty;
  std::vector<RolloutGroup> groups;
  std::vector<const Trajectory*> batch;
  std::vector<std::vector<double>> base, shaped;
  for (int b = 0; b < config.batch_tasks; ++b) {
    const auto key = static_cast<std::uint64_t>(b);
    groups.push_back(toy::rollout_group(*env, policy, params, toy::mix_seed(config.seed, 0x7a5c, key) >> 32,
                                        config.seed, key, ro, "g" + std::to_string(b)));
  }
  for (const auto& g : groups) {
    const auto gs = shape_group(g, policy, params, &params, opts);
    for (std::size_t i = 0; i < g.members.size(); ++i) {
      batch.push_back(&g.members[i]);
      base.push_back(gs.members[i].base_advantages());
      shaped.push_back(gs.members[i].shaped_advantages());
    }
  }
  const auto terms = token_terms(policy, params, nullptr, batch, env->tags());
  const auto rep = measure_gradient_alignment(terms, base, shaped, params.vocab_size());
  std::cout << "alignment: tokens " << rep.tokens << " per-token max rel error "
            << rep.max_proportionality_error << " cosine "
            << (rep.cosine ? std::to_string(*rep.cosine) : std::string("undefined (zero norm)"))
            << (rep.proportional ? " PASS" : " FAIL") << '\n';
  return rep.proportional;
}

int run(int argc, char** argv) {
  CLI::App app{"Step-level hindsight advantage shaping for GRPO on toy environments"};
  app.require_subcommand(1);

  CommonRunArgs train_args;
  auto* train = app.add_subcommand("train", "Run shaped GRPO training");
  add_run_args(train, train_args);

  CommonRunArgs roll_args;
  int roll_tasks = 4;
  std::string roll_out, roll_params, roll_teacher;
  auto* rollout = app.add_subcommand("rollout", "Sample rollout groups to JSONL");
  add_run_args(rollout, roll_args);
  rollout->add_option("--tasks", roll_tasks, "Number of groups")->check(CLI::PositiveNumber);
  rollout->add_option("-o,--output", roll_out, "Output JSONL")->required();
  rollout->add_option("--params", roll_params, "Policy parameter file (default: initial params)");
  rollout->add_option("--save-teacher", roll_teacher, "Also write the policy as a teacher snapshot");

  CommonRunArgs shape_args;
  std::string shape_in, shape_teacher, shape_out;
  int shape_step = 0;
  auto* shape = app.add_subcommand("shape", "Shape a rollout file offline");
  add_run_args(shape, shape_args);
  shape->add_option("-i,--input", shape_in, "Rollout JSONL")->required();
  shape->add_option("-t,--teacher", shape_teacher, "Teacher snapshot file")->required();
  shape->add_option("-o,--output", shape_out, "Shaped JSONL")->required();
  shape->add_option("--step", shape_step, "Training step for the lambda schedule")->check(CLI::NonNegativeNumber);

  std::string diag_metrics, diag_windows = "0,50,100";
  auto* diagnose = app.add_subcommand("diagnose", "Windowed Std(delta) from a metrics file");
  diagnose->add_option("-m,--metrics", diag_metrics, "metrics.jsonl")->required();
  diagnose->add_option("--windows", diag_windows, "Comma-separated window starts");

  CommonRunArgs verify_args;
  std::string verify_what = "all";
  std::size_t verify_n = 100000;
  std::uint64_t verify_seed = 20240601;
  auto* verify = app.add_subcommand("verify", "Run the shaping property checks");
  add_run_args(verify, verify_args);
  verify->add_option("what", verify_what, "sign|variance|alignment|all")
      ->check(CLI::IsMember({"sign", "variance", "alignment", "all"}));
  verify->add_option("-n,--samples", verify_n, "Monte-Carlo sample count")->check(CLI::Range(10000, 100000000));
  verify->add_option("--mc-seed", verify_seed, "Seed for the sampled checks");

  std::vector<std::string> plot_inputs;
  std::string plot_out;
  auto* plot = app.add_subcommand("plotdata", "Emit step,series,value CSV from metrics files");
  plot->add_option("-m,--metrics", plot_inputs, "metrics.jsonl, optionally LABEL=PATH")->required();
  plot->add_option("-o,--output", plot_out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorCategory::kUsage);
  }

  if (*train) return cmd_train(train_args);
  if (*rollout) return cmd_rollout(roll_args, roll_tasks, roll_out, roll_params, roll_teacher);
  if (*shape) return cmd_shape(shape_args, shape_in, shape_teacher, shape_out, shape_step);
  if (*diagnose) return cmd_diagnose(diag_metrics, diag_windows);
  if (*verify) {
    bool ok = true;
    if (verify_what == "sign" || verify_what == "all") ok = verify_sign(verify_n, verify_seed) && ok;
    if (verify_what == "variance" || verify_what == "all") ok = verify_variance(verify_n, verify_seed) && ok;
    if (verify_what == "alignment" || verify_what == "all") ok = verify_alignment(verify_args) && ok;
    return ok ? 0 : kVerificationFailed;
  }
  if (*plot) {
    std::vector<std::pair<std::string, std::string>> inputs;
    for (const auto& s : plot_inputs) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        inputs.emplace_back("", s);
      } else {
        inputs.emplace_back(s.substr(0, eq), s.substr(eq + 1));
      }
    }
    if (plot_out.empty()) {
      emit_plot_data(inputs, std::cout);
    } else {
      std::ofstream out(plot_out, std::ios::trunc);
      if (!out) throw IoError("cannot open '" + plot_out + "' for writing");
      emit_plot_data(inputs, out);
    }
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
