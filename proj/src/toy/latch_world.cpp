#include "stepopsd/toy/latch_world.hpp"

#include <algorithm>

namespace stepopsd::toy {

namespace {

enum Loc : int {
  kHallway = 0,
  kCountertop,
  kCabinet,
  kShelf,
  kDrawer,
  kTable,
  kMicrowave,
  kFridge,
  kSinkbasin,
  kDesklamp
};

constexpr int kTargets[] = {kCabinet, kShelf, kDrawer, kTable};
constexpr int kHeld = -1;
constexpr int kAbsent = -2;

const std::vector<std::string> kTemplateWords{"pick", "look", "clean", "heat", "cool", "pick2"};

std::vector<int> spots_excluding(int target) {
  std::vector<int> spots;
  for (int l : {kCountertop, kCabinet, kShelf, kDrawer, kTable}) {
    if (l != target) spots.push_back(l);
  }
  return spots;
}

int index_of(const std::vector<std::string>& names, std::string_view name) {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

std::optional<Latent> required_latent(Template t) {
  switch (t) {
    case Template::kClean: return Latent::kCleaned;
    case Template::kHeat: return Latent::kHeated;
    case Template::kCool: return Latent::kCooled;
    default: return std::nullopt;
  }
}

// The appliance and verb that produce a template's latent change.
std::pair<int, const char*> latent_action(Template t) {
  switch (t) {
    case Template::kClean: return {kSinkbasin, "clean"};
    case Template::kHeat: return {kMicrowave, "heat"};
    case Template::kCool: return {kFridge, "cool"};
    default: return {-1, ""};
  }
}

}  // namespace

const std::vector<std::string>& LatchWorld::verbs() {
  static const std::vector<std::string> v{"find", "take",  "goto", "place",  "heat",
                                          "cool", "clean", "use",  "examine"};
  return v;
}

const std::vector<std::string>& LatchWorld::objects() {
  static const std::vector<std::string> v{"mug", "apple", "egg", "potato", "plate", "book"};
  return v;
}

const std::vector<std::string>& LatchWorld::locations() {
  static const std::vector<std::string> v{"hallway", "countertop", "cabinet", "shelf", "drawer",
                                          "table",   "microwave",  "fridge",  "sinkbasin",
                                          "desklamp"};
  return v;
}

int LatchWorld::location_index(std::string_view name) { return index_of(locations(), name); }

LatchWorld::LatchWorld() {
  tags_.tags = {"action", "obs"};
  tags_.environment_tags = {"obs"};
  std::vector<std::string> tokens{"<hindsight>", "</hindsight>", "<action>", "</action>", "<obs>",
                                  "</obs>"};
  for (const auto& v : verbs()) tokens.push_back(v);
  for (const auto& o : objects()) tokens.push_back(o);
  for (const auto& l : locations()) tokens.push_back(l);
  for (const char* w : {"task", "ok", "nothing", "happens", "empty", "pick", "look", "pick2"}) {
    tokens.emplace_back(w);
  }
  vocabulary_ = std::make_shared<const Vocabulary>(std::move(tokens), tags_);
  action_open_ = vocabulary_->id("<action>");
  action_close_ = vocabulary_->id("</action>");
  for (const auto& v : verbs()) verb_ids_.push_back(vocabulary_->id(v));
  for (const auto& o : objects()) arg_ids_.push_back(vocabulary_->id(o));
  for (const auto& l : locations()) arg_ids_.push_back(vocabulary_->id(l));
}

EnvReset LatchWorld::reset(std::uint64_t task_seed) const {
  const auto tmpl = static_cast<Template>(task_seed % kLatchTemplates);
  const std::uint64_t r = task_seed / kLatchTemplates;
  const int obj = static_cast<int>(r % kLatchObjects);
  const int target = tmpl == Template::kLook ? kDesklamp : kTargets[(r / 6) % 4];
  const auto spots = spots_excluding(tmpl == Template::kLook ? kCabinet : target);

  LatchState s;
  s.goal = tmpl;
  s.target = target;
  s.location = kHallway;
  s.object_location.assign(kLatchObjects, kAbsent);
  s.latent.assign(kLatchObjects, Latent::kRaw);
  s.goal_objects = {obj};
  const std::uint64_t spot = (r / 24) % 4;
  s.object_location[obj] = spots[spot];
  if (tmpl == Template::kPickTwo) {
    const int second = static_cast<int>((obj + 1 + (r / 96) % 5) % kLatchObjects);
    s.goal_objects.push_back(second);
    s.object_location[second] = spots[(spot + 1 + (r / 96) % 3) % 4];
  }
  int distractor = (obj + 3) % kLatchObjects;
  if (std::find(s.goal_objects.begin(), s.goal_objects.end(), distractor) != s.goal_objects.end()) {
    distractor = (obj + 4) % kLatchObjects;
  }
  s.object_location[distractor] = spots[(spot + 2) % 4];

  std::vector<std::string> obs{"<obs>", "task", kTemplateWords[static_cast<int>(tmpl)]};
  for (int g : s.goal_objects) obs.push_back(objects()[g]);
  obs.push_back(locations()[target]);
  obs.emplace_back("</obs>");
  return {s, obs};
}

StepResult LatchWorld::step(const EnvState& state, std::span<const std::string> action) const {
  return step_latch(std::get<LatchState>(state), action);
}

StepResult LatchWorld::step_latch(const LatchState& state, std::span<const std::string> action) const {
  StepResult res;
  LatchState next = state;
  next.turn += 1;

  auto invalid = [&] {
    StepResult bad;
    LatchState same = state;
    same.turn += 1;
    bad.state = same;
    bad.invalid = true;
    bad.done = state.done;
    if (!state.done) bad.observation = {"<obs>", "nothing", "happens", "</obs>"};
    return bad;
  };

  if (state.done || action.size() != 4 || action[0] != "<action>" || action[3] != "</action>") {
    return invalid();
  }
  const int verb = index_of(verbs(), action[1]);
  const int obj = index_of(objects(), action[2]);
  const int loc = index_of(locations(), action[2]);
  if (verb < 0 || (obj < 0 && loc < 0)) return invalid();
  const std::string& v = action[1];

  if (v == "find") {
    if (obj < 0 || state.object_location[obj] < 0) return invalid();
    next.location = state.object_location[obj];
  } else if (v == "take") {
    if (obj < 0 || state.held || state.object_location[obj] != state.location) return invalid();
    next.held = obj;
    next.object_location[obj] = kHeld;
  } else if (v == "goto") {
    if (loc < 0 || loc == state.location) return invalid();
    next.location = loc;
  } else if (v == "place") {
    if (obj < 0 || state.held != obj) return invalid();
    next.held.reset();
    next.object_location[obj] = state.location;
    if (state.goal != Template::kLook) {
      const bool all_there = std::all_of(next.goal_objects.begin(), next.goal_objects.end(),
                                         [&](int g) { return next.object_location[g] == next.target; });
      if (all_there) {
        const auto need = required_latent(state.goal);
        const bool ok = !need || std::all_of(next.goal_objects.begin(), next.goal_objects.end(),
                                             [&](int g) { return next.latent[g] == *need; });
        next.done = true;
        res.done = true;
        res.reward = ok ? 1.0 : 0.0;
      }
    }
  } else if (v == "heat" || v == "cool" || v == "clean") {
    const int appliance = v == "heat" ? kMicrowave : v == "cool" ? kFridge : kSinkbasin;
    if (obj < 0 || state.held != obj || state.location != appliance) return invalid();
    next.latent[obj] = v == "heat" ? Latent::kHeated : v == "cool" ? Latent::kCooled : Latent::kCleaned;
  } else if (v == "use") {
    if (loc != kDesklamp || state.location != kDesklamp) return invalid();
    next.lamp_on = true;
  } else if (v == "examine") {
    if (obj < 0 || state.held != obj) return invalid();
    next.done = true;
    res.done = true;
    res.reward = (state.goal == Template::kLook && obj == state.goal_objects.front() &&
                  state.location == kDesklamp && state.lamp_on)
                     ? 1.0
                     : 0.0;
  }

  if (!res.done) {
    res.observation = {"<obs>", "ok", locations()[next.location],
                       next.held ? objects()[*next.held] : std::string("empty"), "</obs>"};
  }
  res.state = next;
  return res;
}

void LatchWorld::allowed_next(std::span<const TokenId> prefix, std::vector<TokenId>& out) const {
  out.clear();
  const auto turn = current_turn(prefix);
  switch (turn.size()) {
    case 0: out.push_back(action_open_); break;
    case 1: out = verb_ids_; break;
    case 2: out = arg_ids_; break;
    case 3: out.push_back(action_close_); break;
    default: break;
  }
}

bool LatchWorld::turn_complete(std::span<const TokenId> turn_tokens) const {
  return turn_tokens.size() >= 4;
}

Role LatchWorld::content_role(std::string_view tag) const {
  return tag == "action" ? Role::kAction : Role::kObservation;
}

std::vector<std::string> LatchWorld::render_action(const std::string& verb, const std::string& arg) {
  return {"<action>", verb, arg, "</action>"};
}

std::vector<std::pair<std::string, std::string>> LatchWorld::solution(std::uint64_t task_seed) const {
  const auto s = std::get<LatchState>(reset(task_seed).state);
  const auto& obj = objects();
  const auto& loc = locations();
  std::vector<std::pair<std::string, std::string>> plan;
  for (int g : s.goal_objects) {
    const std::string& o = obj[g];
    plan.emplace_back("find", o);
    plan.emplace_back("take", o);
    if (s.goal == Template::kLook) {
      plan.emplace_back("goto", "desklamp");
      plan.emplace_back("use", "desklamp");
      plan.emplace_back("examine", o);
      continue;
    }
    if (const auto [appliance, verb] = latent_action(s.goal); appliance >= 0) {
      plan.emplace_back("goto", loc[appliance]);
      plan.emplace_back(verb, o);
    }
    plan.emplace_back("goto", loc[s.target]);
    plan.emplace_back("place", o);
  }
  return plan;
}

std::vector<std::vector<std::string>> LatchWorld::demonstration(std::uint64_t task_seed, Rng& rng,
                                                                double noise) const {
  const auto s = std::get<LatchState>(reset(task_seed).state);
  auto plan = solution(task_seed);
  if (rng.bernoulli(noise)) {
    if (s.goal == Template::kLook) {
      std::erase_if(plan, [](const auto& a) { return a.first == "use"; });
    } else if (required_latent(s.goal)) {
      const std::string verb = latent_action(s.goal).second;
      std::erase_if(plan, [&](const auto& a) { return a.first == verb; });
    } else {
      // Pick templates: carry the last goal object to a wrong spot.
      const auto wrong = spots_excluding(s.target).front();
      for (auto it = plan.rbegin(); it != plan.rend(); ++it) {
        if (it->first == "goto") {
          it->second = locations()[wrong];
          break;
        }
      }
    }
  }
  std::vector<std::vector<std::string>> turns;
  for (const auto& [v, a] : plan) turns.push_back(render_action(v, a));
  return turns;
}

}  // namespace stepopsd::toy
