#include "stepopsd/toy/rollout.hpp"

#include "stepopsd/errors.hpp"

namespace stepopsd::toy {

EpisodeRecorder::EpisodeRecorder(const Environment& env, std::string id) : env_(env) {
  traj_.id = std::move(id);
}

void EpisodeRecorder::push(const std::string& text, double logprob, int turn) {
  const auto& tags = env_.tags();
  TokenRecord rec;
  rec.text = text;
  rec.student_logprob = logprob;
  rec.turn = turn;
  if (auto open = tags.open_tag(text)) {
    rec.role = Role::kStructural;
    open_tag_ = *open;
  } else if (tags.close_tag(text)) {
    rec.role = Role::kStructural;
    open_tag_.reset();
  } else {
    rec.role = open_tag_ ? env_.content_role(*open_tag_) : Role::kObservation;
  }
  traj_.tokens.push_back(std::move(rec));
  ids_.push_back(env_.vocabulary()->id(text));
}

void EpisodeRecorder::add_environment(const std::vector<std::string>& texts, int turn) {
  for (const auto& t : texts) push(t, 0.0, turn);
}

void EpisodeRecorder::add_policy(TokenId token, double logprob, int turn) {
  push(env_.vocabulary()->text(token), logprob, turn);
}

std::string join_tokens(const std::vector<std::string>& texts) {
  std::string out;
  for (const auto& t : texts) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

namespace {

TokenId sample(const Evaluation& ev, Rng& rng) {
  if (ev.allowed.size() == 1) return ev.allowed.front();
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < ev.allowed.size(); ++i) {
    acc += ev.probs[i];
    if (u < acc) return ev.allowed[i];
  }
  return ev.allowed.back();
}

}  // namespace

Trajectory rollout_trajectory(const Environment& env, const SoftmaxPolicy& policy,
                              const PolicyParams& params, std::uint64_t task_seed, Rng& rng,
                              int max_turns, const std::string& id, int max_turn_tokens) {
  if (max_turns <= 0) max_turns = env.default_max_turns();
  EpisodeRecorder rec(env, id);
  auto reset = env.reset(task_seed);
  rec.add_environment(reset.observation, 0);
  EnvState state = std::move(reset.state);

  auto& traj = rec.trajectory();
  for (int turn = 1; turn <= max_turns; ++turn) {
    const std::size_t turn_start = rec.ids().size();
    std::vector<std::string> action;
    for (int k = 0;; ++k) {
      if (k >= max_turn_tokens) throw ConsistencyError("action grammar never completed a turn");
      const auto ev = policy.evaluate(params, rec.ids());
      const TokenId tok = sample(ev, rng);
      rec.add_policy(tok, ev.log_prob_of(tok), turn);
      action.push_back(env.vocabulary()->text(tok));
      const std::span<const TokenId> ids(rec.ids());
      if (env.turn_complete(ids.subspan(turn_start))) break;
    }
    auto res = env.step(state, action);
    if (res.invalid) ++traj.invalid_action_count;
    rec.add_environment(res.observation, turn);
    state = std::move(res.state);
    if (res.done) {
      traj.reward = res.reward;
      traj.success = res.reward == 1.0;
      break;
    }
  }
  return std::move(traj);
}

RolloutGroup rollout_group(const Environment& env, const SoftmaxPolicy& policy,
                           const PolicyParams& params, std::uint64_t task_seed,
                           std::uint64_t run_seed, std::uint64_t stream_key,
                           const RolloutOptions& options, const std::string& group_id) {
  if (options.group_size < 2) throw ConfigError("group size must be at least 2");
  RolloutGroup group;
  group.group_id = group_id;
  group.prompt = join_tokens(env.reset(task_seed).observation);
  for (int i = 0; i < options.group_size; ++i) {
    Rng rng(mix_seed(run_seed, stream_key, static_cast<std::uint64_t>(i)));
    group.members.push_back(rollout_trajectory(env, policy, params, task_seed, rng,
                                               options.max_turns,
                                               group_id + "/" + std::to_string(i),
                                               options.max_turn_tokens));
  }
  return group;
}

Trajectory replay_episode(const Environment& env, std::uint64_t task_seed,
                          const std::vector<std::vector<std::string>>& turns, int max_turns,
                          const std::string& id, const SoftmaxPolicy* policy,
                          const PolicyParams* params) {
  if (max_turns <= 0) max_turns = env.default_max_turns();
  EpisodeRecorder rec(env, id);
  auto reset = env.reset(task_seed);
  rec.add_environment(reset.observation, 0);
  EnvState state = std::move(reset.state);
  auto& traj = rec.trajectory();
  const auto& vocab = *env.vocabulary();

  int turn = 0;
  for (const auto& action : turns) {
    if (++turn > max_turns) break;
    for (const auto& text : action) {
      const TokenId tok = vocab.id(text);
      double lp = 0.0;
      if (policy && params) lp = policy->log_prob(*params, rec.ids(), tok);
      rec.add_policy(tok, lp, turn);
    }
    auto res = env.step(state, action);
    if (res.invalid) ++traj.invalid_action_count;
    rec.add_environment(res.observation, turn);
    state = std::move(res.state);
    if (res.done) {
      traj.reward = res.reward;
      traj.success = res.reward == 1.0;
      break;
    }
  }
  return std::move(traj);
}

}  // namespace stepopsd::toy
