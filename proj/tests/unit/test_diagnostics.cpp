#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "stepopsd/diagnostics.hpp"
#include "stepopsd/errors.hpp"
#include "stepopsd/toy/latch_world.hpp"
#include "stepopsd/toy/rng.hpp"
#include "stepopsd/toy/rollout.hpp"
#include "stepopsd/training.hpp"

using namespace stepopsd;

TEST_CASE("constant gaps have zero spread and alternating signs unit spread") {
  std::vector<std::pair<int, double>> constant, alternating;
  for (int i = 0; i < 40; ++i) {
    constant.emplace_back(i, 0.7);
    alternating.emplace_back(i, i % 2 ? 1.0 : -1.0);
  }
  const auto c = diag_std_delta_raw(constant, {0});
  REQUIRE(c.size() == 1);
  CHECK(*c[0].stddev == doctest::Approx(0.0).epsilon(1e-15));
  const auto a = diag_std_delta_raw(alternating, {0});
  CHECK(*a[0].stddev == doctest::Approx(1.0));
}

TEST_CASE("empty windows are flagged with no statistic") {
  const auto w = diag_std_delta_raw({{3, 1.0}, {4, 2.0}}, {0, 50, 100});
  REQUIRE(w.size() == 3);
  CHECK_FALSE(w[0].empty);
  CHECK(w[0].count == 2);
  CHECK(w[1].empty);
  CHECK_FALSE(w[1].stddev.has_value());
  CHECK(w[2].empty);
  CHECK_FALSE(w[2].end.has_value());
  CHECK(*w[0].end == 50);
}

TEST_CASE("merged per-step statistics equal the pooled computation") {
  toy::Rng rng(6);
  std::vector<std::pair<int, double>> raw;
  std::vector<int> steps;
  std::vector<DeltaStats> per;
  for (int s = 0; s < 130; ++s) {
    DeltaStats d;
    const int n = static_cast<int>(rng.uniform_int(20));
    for (int k = 0; k < n; ++k) {
      const double x = rng.normal(s < 50 ? 0.0 : 1.0, s < 100 ? 2.0 : 0.5);
      raw.emplace_back(s, x);
      d.add(x);
    }
    steps.push_back(s);
    per.push_back(d);
  }
  const auto a = diag_std_delta(steps, per, {0, 50, 100});
  const auto b = diag_std_delta_raw(raw, {0, 50, 100});
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].count == b[i].count);
    CHECK(*a[i].stddev == doctest::Approx(*b[i].stddev).epsilon(1e-12));
    // Two-pass reference.
    double mean = 0;
    std::size_t n = 0;
    for (const auto& [s, x] : raw) {
      if (s >= a[i].begin && (!a[i].end || s < *a[i].end)) {
        mean += x;
        ++n;
      }
    }
    mean /= static_cast<double>(n);
    double var = 0;
    for (const auto& [s, x] : raw) {
      if (s >= a[i].begin && (!a[i].end || s < *a[i].end)) var += (x - mean) * (x - mean);
    }
    CHECK(*a[i].stddev == doctest::Approx(std::sqrt(var / static_cast<double>(n))).epsilon(1e-12));
  }
  CHECK_THROWS(diag_std_delta_raw(raw, {50, 0}));
}

TEST_CASE("sign preservation holds at the worst case and across random draws") {
  const auto worst = verify_sign_preservation(10000, 1, 0.999, 0.999);
  CHECK(worst.passed());
  CHECK(worst.min_psi >= 1 - 0.999 * 0.999 - 1e-12);
  const auto r = verify_sign_preservation(100000, 2);
  CHECK(r.passed());
  CHECK(r.cases == 100000);
  CHECK(r.min_psi > 0.0);
}

TEST_CASE("variance is unchanged at zero mixing") {
  VarianceTestConfig c;
  c.lambda = 0.0;
  c.n = 20000;
  const auto r = verify_variance_bound(c);
  CHECK(r.var_shaped == r.var_base);
}

TEST_CASE("without noise no sign mismatches occur") {
  VarianceTestConfig c;
  c.sigma = 0.0;
  c.n = 20000;
  CHECK(verify_variance_bound(c).sign_mismatches == 0);
}

TEST_CASE("Monte-Carlo variance agrees with quadrature") {
  for (double sigma : {0.5, 1.0, 2.0}) {
    VarianceTestConfig c;
    c.sigma = sigma;
    c.n = 200000;
    const auto mc = verify_variance_bound(c);
    const auto [vb, vs] = oracle::variance_quadrature(sigma, c.lambda, c.alpha, c.fidelity);
    CHECK(mc.var_base == doctest::Approx(vb).epsilon(0.02));
    CHECK(mc.ratio == doctest::Approx(vs / vb).epsilon(0.01));
    // Agreeing tokens are amplified, so shaping raises the total variance in
    // this model; only the sign-mismatch part is dampened.
    CHECK(vs > vb);
  }
}

namespace {

struct Batch {
  toy::LatchWorld env;
  toy::SoftmaxPolicy policy{env.vocabulary(), {}, &env};
  toy::PolicyParams params{env.vocabulary(), 1U << 12, 17};
  std::vector<Trajectory> trajs;
  std::vector<TokenTerm> terms;

  explicit Batch(int n) {
    toy::Rng init(1);
    for (auto& w : params.weights()) w = init.normal(0.0, 0.2);
    for (int i = 0; i < n; ++i) {
      toy::Rng rng(static_cast<std::uint64_t>(100 + i));
      trajs.push_back(toy::rollout_trajectory(env, policy, params, static_cast<std::uint64_t>(i), rng, 8, "t"));
    }
    std::vector<const Trajectory*> ptrs;
    for (const auto& t : trajs) ptrs.push_back(&t);
    terms = token_terms(policy, params, nullptr, ptrs, env.tags());
  }
};

}  // namespace

TEST_CASE("alignment is exactly one when shaping is the identity") {
  Batch b(4);
  std::vector<std::vector<double>> base;
  for (std::size_t i = 0; i < b.trajs.size(); ++i) base.emplace_back(b.trajs[i].size(), i % 2 ? 1.0 : -0.5);
  const auto r = measure_gradient_alignment(b.terms, base, base, b.params.vocab_size());
  REQUIRE(r.cosine.has_value());
  CHECK(*r.cosine == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.proportional);
}

TEST_CASE("a single token gives cosine one under any positive scaling") {
  Batch b(1);
  // Singleton-grammar positions have a zero gradient; take a real decision.
  auto it = std::find_if(b.terms.begin(), b.terms.end(), [](const TokenTerm& t) {
    return std::any_of(t.coef.begin(), t.coef.end(), [](double c) { return c != 0.0; });
  });
  REQUIRE(it != b.terms.end());
  std::vector<TokenTerm> one{*it};
  std::vector<std::vector<double>> base{std::vector<double>(b.trajs[0].size(), 0.8)};
  auto shaped = base;
  shaped[0][one[0].token] *= 0.96;
  const auto r = measure_gradient_alignment(one, base, shaped, b.params.vocab_size());
  CHECK(*r.cosine == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("positive per-token scaling keeps each contribution proportional") {
  Batch b(6);
  toy::Rng rng(2);
  std::vector<std::vector<double>> base, shaped;
  for (const auto& t : b.trajs) {
    const double a = rng.uniform(-2, 2);
    base.emplace_back(t.size(), a);
    std::vector<double> s(t.size());
    for (auto& v : s) v = a * rng.uniform(0.8, 1.2);
    shaped.push_back(s);
  }
  const auto r = measure_gradient_alignment(b.terms, base, shaped, b.params.vocab_size());
  CHECK(r.proportional);
  CHECK(r.max_proportionality_error < 1e-12);
  REQUIRE(r.cosine.has_value());
  CHECK(*r.cosine > 0.0);
}

TEST_CASE("zero-norm gradients leave the cosine undefined") {
  Batch b(2);
  std::vector<std::vector<double>> zero;
  for (const auto& t : b.trajs) zero.emplace_back(t.size(), 0.0);
  const auto r = measure_gradient_alignment(b.terms, zero, zero, b.params.vocab_size());
  CHECK(r.zero_norm);
  CHECK_FALSE(r.cosine.has_value());
}

TEST_CASE("plot data is a tidy CSV over the metrics series") {
  const auto dir = std::filesystem::temp_directory_path() / "stepopsd_unit_plot";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "m.jsonl");
    for (int s = 0; s < 3; ++s) {
      MetricsRecord m;
      m.step = s;
      m.success_rate = 0.25 * s;
      out << m.to_json().dump() << "\n";
    }
  }
  std::ostringstream csv;
  emit_plot_data({{"shaped", (dir / "m.jsonl").string()}}, csv);
  const auto text = csv.str();
  CHECK(text.rfind("step,series,value\n", 0) == 0);
  CHECK(text.find("2,shaped/success_rate,0.5") != std::string::npos);
  std::filesystem::remove_all(dir);
}
