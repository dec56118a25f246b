#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stepopsd/errors.hpp"
#include "stepopsd/grpo.hpp"
#include "stepopsd/toy/latch_world.hpp"
#include "stepopsd/toy/rng.hpp"
#include "stepopsd/toy/rollout.hpp"

using namespace stepopsd;

TEST_CASE("invalid-action penalty") {
  Trajectory t;
  t.reward = 1.0;
  CHECK(apply_reward_penalties(t, 0.1) == 1.0);
  t.invalid_action_count = 2;
  CHECK(apply_reward_penalties(t, 0.1) == doctest::Approx(0.8));
  t.reward = 0.0;
  t.invalid_action_count = 3;
  CHECK(apply_reward_penalties(t, 0.1) == doctest::Approx(-0.3));
}

TEST_CASE("group advantage examples") {
  const std::vector<double> a{1, 0, 0, 1};
  const auto adv = group_advantage(a);
  const std::vector<double> expect{1, -1, -1, 1};
  for (std::size_t i = 0; i < 4; ++i) CHECK(adv[i] == doctest::Approx(expect[i]).epsilon(1e-7));
  const std::vector<double> same{1, 1, 1, 1};
  for (double v : group_advantage(same)) CHECK(v == 0.0);
  const std::vector<double> two{1, 0};
  CHECK(group_advantage(two)[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(group_advantage(two)[1] == doctest::Approx(-1.0).epsilon(1e-7));
  const std::vector<double> one{1};
  CHECK_THROWS_AS(group_advantage(one), ConfigError);
}

TEST_CASE("group advantage matches the reference and is centred") {
  toy::Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> r(2 + rng.uniform_int(10));
    for (auto& v : r) v = rng.bernoulli(0.5) ? 1.0 - 0.1 * static_cast<double>(rng.uniform_int(3)) : -0.1 * static_cast<double>(rng.uniform_int(4));
    const auto adv = group_advantage(r);
    const auto ref = oracle::group_advantage(r);
    double sum = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK(std::fabs(adv[i] - static_cast<double>(ref[i])) < 1e-12);
      sum += adv[i];
    }
    CHECK(std::fabs(sum) < 1e-9);
  }
}

TEST_CASE("token advantages broadcast to policy tokens only") {
  Trajectory t;
  t.tokens = {{"<action>", Role::kStructural, -0.1, 1}, {"go", Role::kAction, -0.1, 1},
              {"north", Role::kAction, -0.1, 1},    {"</action>", Role::kStructural, -0.1, 1},
              {"<obs>", Role::kStructural, 0.0, 1},  {"wall", Role::kObservation, 0.0, 1},
              {"x", Role::kObservation, 0.0, 1},     {"</obs>", Role::kStructural, 0.0, 1}};
  const auto a = broadcast_token_advantages(t, 1.5);
  CHECK(a == std::vector<double>{1.5, 1.5, 1.5, 1.5, 0, 0, 0, 0});
  for (double v : broadcast_token_advantages(t, 0.0)) CHECK(v == 0.0);
}

TEST_CASE("k3 penalty values") {
  CHECK(kl_token_penalty(-1.0, -1.0) == 0.0);
  CHECK(kl_token_penalty(-1.1, -1.0) == doctest::Approx(static_cast<double>(oracle::k3(0.1L))).epsilon(1e-12));
  CHECK(kl_token_penalty(-1.1, -1.0) == doctest::Approx(0.0051709).epsilon(1e-4));
  CHECK(kl_token_penalty(-0.9, -1.0) == doctest::Approx(0.0048374).epsilon(1e-4));
  toy::Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const double p = rng.uniform(-20, 0), q = rng.uniform(-20, 0);
    CHECK(kl_token_penalty(p, q) >= 0.0);
    CHECK(kl_token_penalty(p, q) == doctest::Approx(static_cast<double>(oracle::k3(static_cast<long double>(q) - p))).epsilon(1e-10));
  }
}

namespace {

struct Fixture {
  toy::LatchWorld env;
  toy::SoftmaxPolicy policy{env.vocabulary(), {}, &env};
  toy::PolicyParams params{env.vocabulary(), 1U << 12, 17};

  Fixture() {
    toy::Rng rng(1);
    for (auto& w : params.weights()) w = rng.normal(0.0, 0.05);
  }

  Trajectory episode(std::uint64_t seed) {
    toy::Rng rng(seed);
    return toy::rollout_trajectory(env, policy, params, seed, rng, 8, "e");
  }
};

}  // namespace

TEST_CASE("zero advantages and zero KL leave params exactly unchanged") {
  Fixture f;
  const auto t = f.episode(4);
  const std::vector<const Trajectory*> batch{&t};
  const std::vector<std::vector<double>> adv{std::vector<double>(t.size(), 0.0)};
  auto p = f.params;
  auto ref = f.params;
  ref.weights()[5] += 0.3;
  policy_update(p, f.policy, batch, adv, 0.1, 0.0, ref, 0, f.env.tags());
  CHECK(p == f.params);
}

TEST_CASE("one token with unit advantage moves params by lr times grad log pi") {
  Fixture f;
  const auto t = f.episode(9);
  // The loss is a token mean, so truncate to a single policy token.
  std::size_t first = 0;
  while (!is_policy_generated(t.tokens[first], f.env.tags())) ++first;
  Trajectory one = t;
  one.tokens.resize(first + 1);
  const std::vector<const Trajectory*> batch{&one};
  std::vector<std::vector<double>> adv{std::vector<double>(one.size(), 0.0)};
  adv[0][first] = 1.0;
  auto p = f.params;
  const auto report = policy_update(p, f.policy, batch, adv, 0.1, 0.0, f.params, 0, f.env.tags());
  CHECK(report.tokens == 1);

  std::vector<toy::TokenId> ctx;
  for (std::size_t i = 0; i < first; ++i) ctx.push_back(f.env.vocabulary()->id(one.tokens[i].text));
  const auto tok = f.env.vocabulary()->id(one.tokens[first].text);
  const auto feats = f.policy.features(f.params, ctx);
  auto scratch = f.params;
  for (std::size_t k = 0; k < std::min<std::size_t>(feats.size(), 4); ++k) {
    for (toy::TokenId v : {tok, static_cast<toy::TokenId>((tok + 1) % f.env.vocabulary()->size())}) {
      const double fd = oracle::fd_logprob(f.policy, scratch, ctx, tok, feats[k], v);
      const double moved = p.at(feats[k], v) - f.params.at(feats[k], v);
      CHECK(std::fabs(moved - 0.1 * fd) < 1e-5);
    }
  }
}

TEST_CASE("gradient of log pi matches finite differences") {
  Fixture f;
  const auto t = f.episode(21);
  std::vector<toy::TokenId> ctx;
  int checked = 0;
  for (std::size_t i = 0; i < t.size() && checked < 6; ++i) {
    const auto id = f.env.vocabulary()->id(t.tokens[i].text);
    if (is_policy_generated(t.tokens[i], f.env.tags())) {
      const auto g = f.policy.grad_logprob(f.params, ctx, id);
      auto scratch = f.params;
      for (std::size_t k = 0; k < g.rows.size(); k += 3) {
        std::size_t mult = 0;
        for (auto r : g.rows) mult += r == g.rows[k];
        for (toy::TokenId v = 0; v < f.env.vocabulary()->size(); v += 7) {
          const double fd = oracle::fd_logprob(f.policy, scratch, ctx, id, g.rows[k], v);
          CHECK(std::fabs(fd - static_cast<double>(mult) * g.coef[v]) < 1e-6);
        }
      }
      ++checked;
    }
    ctx.push_back(id);
  }
  CHECK(checked == 6);
}

TEST_CASE("sparse gradient accumulation is deterministic and rejects non-finite steps") {
  Fixture f;
  const auto t1 = f.episode(30), t2 = f.episode(31);
  const std::vector<const Trajectory*> batch{&t1, &t2};
  const auto terms = token_terms(f.policy, f.params, nullptr, batch, f.env.tags());
  std::vector<std::vector<double>> adv{std::vector<double>(t1.size(), 0.7), std::vector<double>(t2.size(), -0.4)};
  const auto g1 = surrogate_gradient(terms, adv, 0.01, f.params.vocab_size(), nullptr);
  const auto g2 = surrogate_gradient(terms, adv, 0.01, f.params.vocab_size(), nullptr);
  REQUIRE(g1.sorted_rows() == g2.sorted_rows());
  for (auto r : g1.sorted_rows()) CHECK(*g1.row(r) == *g2.row(r));
  CHECK(g1.dot(g2) == doctest::Approx(g1.norm() * g1.norm()));

  adv[0].assign(t1.size(), std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(surrogate_gradient(terms, adv, 0.01, f.params.vocab_size(), nullptr), NumericalError);
  SparseGradient bad(f.params.vocab_size());
  bad.add(terms.back(), std::numeric_limits<double>::infinity());
  CHECK_FALSE(bad.all_finite());
  auto p = f.params;
  CHECK_THROWS_AS(apply_update(p, bad, 0.1), NumericalError);
  CHECK(p == f.params);
}
