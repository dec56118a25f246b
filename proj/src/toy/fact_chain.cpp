#include "stepopsd/toy/fact_chain.hpp"

#include <algorithm>

namespace stepopsd::toy {

namespace {

int index_of(const std::vector<std::string>& names, std::string_view name) {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

std::vector<std::string> no_results() {
  return {"<information>", "no", "results", "</information>"};
}

}  // namespace

const std::vector<std::string>& FactChain::entities() {
  static const std::vector<std::string> v{"alice", "bob",  "carol", "dave",  "erin", "frank",
                                          "grace", "heidi", "paris", "rome",  "oslo", "cairo",
                                          "lima",  "quito", "delhi", "tokyo"};
  return v;
}

const std::vector<std::string>& FactChain::relations() {
  static const std::vector<std::string> v{"mother", "mentor", "city", "rival"};
  return v;
}

const std::vector<std::string>& FactChain::think_words() {
  static const std::vector<std::string> v{"plan", "recall", "verify"};
  return v;
}

FactChain::FactChain() {
  tags_.tags = {"think", "search", "answer", "information", "obs"};
  tags_.environment_tags = {"information", "obs"};
  std::vector<std::string> tokens{"<hindsight>", "</hindsight>"};
  for (const auto& t : tags_.tags) {
    tokens.push_back("<" + t + ">");
    tokens.push_back("</" + t + ">");
  }
  for (const char* w : {"question", "of", "no", "results"}) tokens.emplace_back(w);
  for (const auto& w : think_words()) tokens.push_back(w);
  for (const auto& e : entities()) tokens.push_back(e);
  for (const auto& r : relations()) tokens.push_back(r);
  vocabulary_ = std::make_shared<const Vocabulary>(std::move(tokens), tags_);

  const auto& v = *vocabulary_;
  think_open_ = v.id("<think>");
  think_close_ = v.id("</think>");
  search_open_ = v.id("<search>");
  search_close_ = v.id("</search>");
  answer_open_ = v.id("<answer>");
  answer_close_ = v.id("</answer>");
  for (const auto& w : think_words()) think_ids_.push_back(v.id(w));
  for (const auto& e : entities()) entity_ids_.push_back(v.id(e));
  for (const auto& r : relations()) relation_ids_.push_back(v.id(r));

  for (int i = 0; i < kChains; ++i) {
    kb_.push_back({i, i % 4, 8 + i});
    kb_.push_back({8 + i, (i + 1) % 4, (5 * i + 3) % 8});
    // Distractor from the question entity along another relation.
    kb_.push_back({i, (i + 2) % 4, 8 + (i + 3) % 8});
  }
}

std::optional<int> FactChain::lookup(int subject, int relation) const {
  for (const auto& f : kb_) {
    if (f.subject == subject && f.relation == relation) return f.object;
  }
  return std::nullopt;
}

EnvReset FactChain::reset(std::uint64_t task_seed) const {
  const int i = static_cast<int>(task_seed % kChains);
  FactState s;
  s.chain = i;
  s.question_entity = i;
  s.answer_entity = (5 * i + 3) % 8;
  s.cursor = i;
  const auto& e = entities();
  const auto& r = relations();
  return {s,
          {"<obs>", "question", r[(i + 1) % 4], "of", r[i % 4], "of", e[i], "</obs>"}};
}

StepResult FactChain::step(const EnvState& state, std::span<const std::string> action) const {
  return step_fact(std::get<FactState>(state), action);
}

StepResult FactChain::step_fact(const FactState& state, std::span<const std::string> action) const {
  StepResult res;
  FactState next = state;
  next.turn += 1;

  const bool well_formed_prefix = action.size() >= 6 && action[0] == "<think>" &&
                                  index_of(think_words(), action[1]) >= 0 &&
                                  action[2] == "</think>";
  const bool is_search = well_formed_prefix && action.size() == 7 && action[3] == "<search>" &&
                         index_of(entities(), action[4]) >= 0 &&
                         index_of(relations(), action[5]) >= 0 && action[6] == "</search>";
  const bool is_answer = well_formed_prefix && action.size() == 6 && action[3] == "<answer>" &&
                         index_of(entities(), action[4]) >= 0 && action[5] == "</answer>";

  if (state.done || (!is_search && !is_answer)) {
    next = state;
    next.turn += 1;
    res.state = next;
    res.invalid = true;
    res.done = state.done;
    if (!state.done) res.observation = no_results();
    return res;
  }

  const int entity = index_of(entities(), action[4]);
  if (is_answer) {
    next.done = true;
    res.done = true;
    const bool retrieved = (state.retrieved >> state.answer_entity) & 1U;
    res.reward = entity == state.answer_entity && retrieved ? 1.0 : 0.0;
    res.state = next;
    return res;
  }

  const int relation = index_of(relations(), action[5]);
  std::optional<int> found;
  if (!state.poisoned && state.cursor == entity) found = lookup(entity, relation);
  if (found) {
    next.cursor = *found;
    next.retrieved |= 1U << *found;
    res.observation = {"<information>", entities()[*found], "</information>"};
  } else {
    next.poisoned = true;
    next.cursor.reset();
    res.observation = no_results();
  }
  res.state = next;
  return res;
}

void FactChain::allowed_next(std::span<const TokenId> prefix, std::vector<TokenId>& out) const {
  out.clear();
  const auto turn = current_turn(prefix);
  switch (turn.size()) {
    case 0: out.push_back(think_open_); break;
    case 1: out = think_ids_; break;
    case 2: out.push_back(think_close_); break;
    case 3: out = {search_open_, answer_open_}; break;
    case 4: out = entity_ids_; break;
    case 5:
      if (turn[3] == search_open_) {
        out = relation_ids_;
      } else {
        out.push_back(answer_close_);
      }
      break;
    case 6:
      if (turn[3] == search_open_) out.push_back(search_close_);
      break;
    default: break;
  }
}

bool FactChain::turn_complete(std::span<const TokenId> turn_tokens) const {
  if (turn_tokens.size() < 4) return false;
  return turn_tokens.size() >= (turn_tokens[3] == search_open_ ? 7U : 6U);
}

Role FactChain::content_role(std::string_view tag) const {
  if (tag == "think") return Role::kReasoning;
  if (tag == "search") return Role::kAction;
  if (tag == "answer") return Role::kAnswer;
  return Role::kObservation;
}

std::vector<std::vector<std::string>> FactChain::candidate_actions() const {
  std::vector<std::vector<std::string>> out;
  for (const auto& e : entities()) {
    for (const auto& r : relations()) {
      out.push_back({"<think>", "plan", "</think>", "<search>", e, r, "</search>"});
    }
    out.push_back({"<think>", "plan", "</think>", "<answer>", e, "</answer>"});
  }
  return out;
}

std::vector<std::vector<std::string>> FactChain::demonstration(std::uint64_t task_seed, Rng& rng,
                                                               double noise) const {
  const int i = static_cast<int>(task_seed % kChains);
  const auto& e = entities();
  const auto& r = relations();
  std::string rel1 = r[i % 4];
  std::string rel2 = r[(i + 1) % 4];
  if (rng.bernoulli(noise)) {
    if (rng.uniform_int(2) == 0) {
      rel1 = r[(i + 2) % 4];
    } else {
      rel2 = r[(i + 3) % 4];
    }
  }
  return {
      {"<think>", "plan", "</think>", "<search>", e[i], rel1, "</search>"},
      {"<think>", "recall", "</think>", "<search>", e[8 + i], rel2, "</search>"},
      {"<think>", "verify", "</think>", "<answer>", e[(5 * i + 3) % 8], "</answer>"},
  };
}

}  // namespace stepopsd::toy
