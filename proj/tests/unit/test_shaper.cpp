#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stepopsd/errors.hpp"
#include "stepopsd/shaper.hpp"
#include "stepopsd/toy/rng.hpp"

using namespace stepopsd;

TEST_CASE("raw_weight at zero gap or zero sign is exactly one") {
  for (int s : {-1, 0, 1}) CHECK(raw_weight(s, 0.0) == 1.0);
  CHECK(raw_weight(0, 7.0) == 1.0);
}

TEST_CASE("raw_weight matches the extended-precision logistic") {
  CHECK(raw_weight(1, 1.0) == doctest::Approx(1.462117).epsilon(1e-6));
  CHECK(raw_weight(-1, 1.0) == doctest::Approx(0.537883).epsilon(1e-6));
  toy::Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const double d = rng.uniform(-30, 30);
    const int s = rng.bernoulli(0.5) ? 1 : -1;
    const double ref = static_cast<double>(oracle::logistic2(static_cast<long double>(s) * d));
    CHECK(std::fabs(raw_weight(s, d) - ref) < 1e-13);
    CHECK(raw_weight(s, d) > 0.0);
    CHECK(raw_weight(s, d) < 2.0);
    CHECK(raw_weight(s, d) + raw_weight(-s, d) == doctest::Approx(2.0).epsilon(1e-14));
  }
}

TEST_CASE("equal-step normalization hand example") {
  const auto out = normalize_equal_step({{0.2, 0.0}, {-0.3, -0.3}});
  REQUIRE(out.size() == 2);
  CHECK(out[0][0] == doctest::Approx(0.4));
  CHECK(out[0][1] == doctest::Approx(0.0));
  CHECK(out[1][0] == doctest::Approx(-0.2));
  CHECK(out[1][1] == doctest::Approx(-0.2));
}

TEST_CASE("a single step is unchanged by normalization") {
  const std::vector<std::vector<double>> in{{0.3, -0.1, 0.05}};
  const auto out = normalize_equal_step(in);
  for (std::size_t j = 0; j < 3; ++j) CHECK(out[0][j] == doctest::Approx(in[0][j]).epsilon(1e-15));
}

TEST_CASE("an all-zero step is left alone and excluded from the budget") {
  const auto out = normalize_equal_step({{0.0, 0.0}, {0.4, -0.2}});
  CHECK(out[0] == std::vector<double>{0.0, 0.0});
  CHECK(out[1][0] == doctest::Approx(0.4));
  CHECK(out[1][1] == doctest::Approx(-0.2));
}

TEST_CASE("normalization matches the reference and equalizes mean-abs") {
  toy::Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::vector<double>> m(1 + rng.uniform_int(6));
    for (auto& step : m) {
      step.resize(1 + rng.uniform_int(5));
      const bool zero = rng.bernoulli(0.15);
      for (auto& v : step) v = zero ? 0.0 : rng.uniform(-1, 1);
    }
    const auto out = normalize_equal_step(m);
    const auto ref = oracle::normalize(m);
    double budget = -1;
    for (std::size_t k = 0; k < m.size(); ++k) {
      for (std::size_t j = 0; j < m[k].size(); ++j) {
        CHECK(std::fabs(out[k][j] - static_cast<double>(ref[k][j])) < 1e-12);
        // Direction of every modification is preserved.
        CHECK(out[k][j] * m[k][j] >= 0.0);
      }
      if (mean_abs(m[k]) >= kEligibleMeanAbs) {
        if (budget < 0) budget = mean_abs(out[k]);
        CHECK(mean_abs(out[k]) == doctest::Approx(budget).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("clip_weight projects onto the trust region") {
  CHECK(clip_weight(1.4621, 0.2) == doctest::Approx(1.2));
  CHECK(clip_weight(1.1, 0.2) == doctest::Approx(1.1));
  CHECK(clip_weight(0.5379, 0.05) == doctest::Approx(0.95));
}

TEST_CASE("mixing examples") {
  CHECK(mix_advantage(3.7, 1.2, 0.0) == 3.7);
  CHECK(psi_of(1.2, 0.2) == doctest::Approx(1.04));
  CHECK(mix_advantage(2.0, 1.2, 0.2) == doctest::Approx(2.08));
  CHECK(psi_of(0.8, 0.2) == doctest::Approx(0.96));
  CHECK(mix_advantage(-2.0, 0.8, 0.2) == doctest::Approx(-1.92));
  CHECK(mix_advantage(0.0, 1.2, 0.2) == 0.0);
}

TEST_CASE("lambda schedule decays linearly to zero") {
  ShapingConfig c;
  CHECK(lambda_schedule(0, c) == doctest::Approx(0.2));
  CHECK(lambda_schedule(25, c) == doctest::Approx(0.1));
  CHECK(lambda_schedule(50, c) == 0.0);
  CHECK(lambda_schedule(75, c) == 0.0);
  for (int t = 1; t < 120; ++t) CHECK(lambda_schedule(t, c) <= lambda_schedule(t - 1, c));
}

TEST_CASE("shaping config validation") {
  ShapingConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha_clip = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lambda_mix_initial = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.decay_horizon = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.teacher_refresh_interval = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

namespace {

struct OneStep {
  Trajectory traj;
  std::vector<StepSegment> segments;
  std::vector<GapRecord> gaps;
};

// `<action> go </action>` with a single scored token.
OneStep one_token_step(double delta) {
  OneStep s;
  s.traj.tokens = {{"<action>", Role::kStructural, -0.1, 1},
                   {"go", Role::kAction, -1.0, 1},
                   {"</action>", Role::kStructural, -0.1, 1}};
  s.segments.push_back({0, Span(1, 2), {true}});
  s.gaps.push_back({0, 0, 1, -1.0 + delta, -1.0, delta});
  return s;
}

}  // namespace

TEST_CASE("composed single-token example") {
  const auto s = one_token_step(1.0);
  ShapingConfig c;
  const auto out = shape_trajectory(s.traj, s.segments, s.gaps, {-2.0, -2.0, -2.0}, 0.2, c);
  REQUIRE(out.size() == 3);
  CHECK(out[1].w_raw == doctest::Approx(0.537883).epsilon(1e-6));
  CHECK(out[1].w_normalized == doctest::Approx(out[1].w_raw).epsilon(1e-15));
  CHECK(out[1].w_final == doctest::Approx(0.8));
  CHECK(out[1].psi == doctest::Approx(0.96));
  CHECK(out[1].a_shaped == doctest::Approx(-1.92));
  REQUIRE(out[1].step_index.has_value());
  CHECK_FALSE(out[0].step_index.has_value());
  CHECK(out[0].psi == 1.0);
  CHECK(out[0].a_shaped == -2.0);
}

TEST_CASE("unshaped trajectories and zero lambda pass advantages through") {
  const auto s = one_token_step(4.0);
  const std::vector<double> a{1.5, 1.5, 1.5};
  for (const auto& out : {shape_trajectory(s.traj, s.segments, s.gaps, a, 0.2, {}, false),
                          shape_trajectory(s.traj, s.segments, s.gaps, a, 0.0, {})}) {
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(out[i].psi == 1.0);
      CHECK(out[i].a_shaped == a[i]);
    }
  }
}

TEST_CASE("a gap list that does not match the segments is rejected") {
  auto s = one_token_step(1.0);
  s.gaps.push_back(s.gaps.front());
  CHECK_THROWS_AS(shape_trajectory(s.traj, s.segments, s.gaps, {1, 1, 1}, 0.2, {}), ConsistencyError);
  s.gaps.clear();
  CHECK_THROWS_AS(shape_trajectory(s.traj, s.segments, s.gaps, {1, 1, 1}, 0.2, {}), ConsistencyError);
  auto t = one_token_step(1.0);
  t.gaps[0].token_index = 2;
  CHECK_THROWS_AS(shape_trajectory(t.traj, t.segments, t.gaps, {1, 1, 1}, 0.2, {}), ConsistencyError);
}

TEST_CASE("shaped advantages keep the sign and stay in the trust band") {
  toy::Rng rng(99);
  for (int trial = 0; trial < 2000; ++trial) {
    const double lambda = rng.uniform(0, 0.999);
    ShapingConfig c;
    c.alpha_clip = rng.uniform(0.001, 0.999);
    c.normalization = rng.bernoulli(0.5) ? Normalization::kEqualStepMeanAbs : Normalization::kNone;
    const auto s = one_token_step(rng.uniform(-30, 30));
    const double a = rng.bernoulli(0.05) ? 0.0 : rng.uniform(-5, 5);
    const auto out = shape_trajectory(s.traj, s.segments, s.gaps, {a, a, a}, lambda, c);
    for (const auto& tok : out) {
      CHECK(tok.psi >= 1 - lambda * c.alpha_clip - 1e-12);
      CHECK(tok.psi <= 1 + lambda * c.alpha_clip + 1e-12);
      CHECK(tok.w_final >= 1 - c.alpha_clip - 1e-15);
      CHECK(tok.w_final <= 1 + c.alpha_clip + 1e-15);
      if (a == 0.0) CHECK(tok.a_shaped == 0.0);
      else CHECK(sign_of(tok.a_shaped) == sign_of(a));
    }
  }
}

TEST_CASE("normalization names round-trip") {
  for (auto n : {Normalization::kEqualStepMeanAbs, Normalization::kNone}) {
    CHECK(parse_normalization(normalization_name(n)) == n);
  }
  CHECK_FALSE(parse_normalization("l2").has_value());
}
