#include "stepopsd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stepopsd/errors.hpp"
#include "stepopsd/shaper.hpp"
#include "stepopsd/toy/rng.hpp"

namespace stepopsd {

void DeltaStats::add(double x) {
  ++count;
  const double d = x - mean;
  mean += d / static_cast<double>(count);
  m2 += d * (x - mean);
}

void DeltaStats::merge(const DeltaStats& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count);
  const double nb = static_cast<double>(other.count);
  const double d = other.mean - mean;
  const double n = na + nb;
  mean += d * nb / n;
  m2 += other.m2 + d * d * na * nb / n;
  count += other.count;
}

std::optional<double> DeltaStats::stddev() const {
  if (count == 0) return std::nullopt;
  return std::sqrt(std::max(0.0, m2 / static_cast<double>(count)));
}

namespace {

void check_boundaries(const std::vector<int>& b) {
  if (b.empty()) throw ConfigError("window boundaries must not be empty");
  for (std::size_t i = 1; i < b.size(); ++i) {
    if (b[i] <= b[i - 1]) throw ConfigError("window boundaries must be strictly increasing");
  }
}

std::optional<std::size_t> window_of(int step, const std::vector<int>& b) {
  if (step < b.front()) return std::nullopt;
  const auto it = std::upper_bound(b.begin(), b.end(), step);
  return static_cast<std::size_t>(it - b.begin()) - 1;
}

std::vector<WindowStat> finish(const std::vector<int>& b, const std::vector<DeltaStats>& acc) {
  std::vector<WindowStat> out;
  for (std::size_t w = 0; w < b.size(); ++w) {
    WindowStat s;
    s.begin = b[w];
    if (w + 1 < b.size()) s.end = b[w + 1];
    s.count = acc[w].count;
    s.empty = acc[w].count == 0;
    if (!s.empty) {
      s.mean = acc[w].mean;
      s.stddev = acc[w].stddev();
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

std::vector<WindowStat> diag_std_delta(const std::vector<int>& steps,
                                       const std::vector<DeltaStats>& per_step,
                                       const std::vector<int>& boundaries) {
  check_boundaries(boundaries);
  if (steps.size() != per_step.size()) throw ConsistencyError("steps and statistics differ in length");
  std::vector<DeltaStats> acc(boundaries.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (auto w = window_of(steps[i], boundaries)) acc[*w].merge(per_step[i]);
  }
  return finish(boundaries, acc);
}

std::vector<WindowStat> diag_std_delta_raw(const std::vector<std::pair<int, double>>& deltas,
                                           const std::vector<int>& boundaries) {
  check_boundaries(boundaries);
  std::vector<DeltaStats> acc(boundaries.size());
  for (const auto& [step, d] : deltas) {
    if (auto w = window_of(step, boundaries)) acc[*w].add(d);
  }
  return finish(boundaries, acc);
}

SignReport verify_sign_preservation(std::size_t n, std::uint64_t seed,
                                    std::optional<double> fixed_lambda,
                                    std::optional<double> fixed_alpha) {
  toy::Rng rng(seed);
  SignReport rep;
  rep.min_psi = INFINITY;
  rep.max_psi = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    double a = rng.uniform(-5.0, 5.0);
    if (rng.bernoulli(0.01)) a = 0.0;
    const double delta = rng.uniform(-30.0, 30.0);
    const double lambda = fixed_lambda ? *fixed_lambda : rng.uniform();
    double alpha = fixed_alpha ? *fixed_alpha : rng.uniform();
    if (alpha == 0.0) alpha = 0.5;

    const double w = clip_weight(raw_weight(sign_of(a), delta), alpha);
    const double psi = psi_of(w, lambda);
    const double shaped = psi * a;
    rep.min_psi = std::min(rep.min_psi, psi);
    rep.max_psi = std::max(rep.max_psi, psi);
    ++rep.cases;
    const bool ok = sign_of(shaped) == sign_of(a) && psi > 0.0 && psi >= 1.0 - lambda * alpha - 1e-15;
    if (!ok) {
      ++rep.violations;
      if (!rep.counterexample) {
        std::ostringstream os;
        os.precision(17);
        os << "A=" << a << " delta=" << delta << " lambda=" << lambda << " alpha=" << alpha
           << " psi=" << psi << " shaped=" << shaped;
        rep.counterexample = os.str();
      }
    }
  }
  return rep;
}

VarianceReport verify_variance_bound(const VarianceTestConfig& cfg) {
  if (cfg.n < 2) throw ConfigError("variance test needs at least two samples");
  toy::Rng rng(cfg.seed);
  DeltaStats base;
  DeltaStats shaped;
  VarianceReport rep;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const double a_star = rng.normal(cfg.a_star_mean, cfg.a_star_sd);
    const double eps = rng.normal(0.0, cfg.sigma);
    const double a = a_star + eps;
    const double delta = cfg.fidelity * a_star;
    if (sign_of(a) != sign_of(a_star)) ++rep.sign_mismatches;
    const double w = clip_weight(raw_weight(sign_of(a), delta), cfg.alpha);
    base.add(a);
    shaped.add(psi_of(w, cfg.lambda) * a);
  }
  rep.var_base = base.m2 / static_cast<double>(base.count);
  rep.var_shaped = shaped.m2 / static_cast<double>(shaped.count);
  rep.ratio = rep.var_shaped / rep.var_base;
  return rep;
}

double cosine_similarity(const SparseGradient& a, const SparseGradient& b) {
  const double na = a.dot(a);
  const double nb = b.dot(b);
  return a.dot(b) / std::sqrt(na * nb);
}

AlignmentReport measure_gradient_alignment(const std::vector<TokenTerm>& terms,
                                           const std::vector<std::vector<double>>& base,
                                           const std::vector<std::vector<double>>& shaped,
                                           std::size_t vocab_size, double tolerance) {
  AlignmentReport rep;
  SparseGradient g_rl(vocab_size);
  SparseGradient g_sh(vocab_size);
  for (const auto& t : terms) {
    const double a = base.at(t.item).at(t.token);
    const double s = shaped.at(t.item).at(t.token);
    g_rl.add(t, a);
    g_sh.add(t, s);
    ++rep.tokens;
    if (a == 0.0) {
      if (s != 0.0) {
        rep.proportional = false;
        rep.max_proportionality_error = INFINITY;
      }
      continue;
    }
    const double psi = s / a;
    if (!(psi > 0.0)) rep.proportional = false;
    // Contribution entries are a * coef and s * coef.
    for (double c : t.coef) {
      const double unshaped = a * c;
      const double contribution = s * c;
      const double expected = psi * unshaped;
      const double scale = std::max(std::abs(expected), std::abs(contribution));
      if (scale == 0.0) continue;
      const double err = std::abs(contribution - expected) / scale;
      rep.max_proportionality_error = std::max(rep.max_proportionality_error, err);
    }
  }
  if (rep.max_proportionality_error > tolerance) rep.proportional = false;
  const double na = g_rl.dot(g_rl);
  const double nb = g_sh.dot(g_sh);
  if (na == 0.0 || nb == 0.0) {
    rep.zero_norm = true;
  } else {
    rep.cosine = g_rl.dot(g_sh) / std::sqrt(na * nb);
  }
  return rep;
}

const std::vector<std::string>& plot_series() {
  static const std::vector<std::string> s{
      "success_rate", "mean_reward",         "lambda",      "std_delta",
      "clip_saturation", "mean_abs_psi_minus_1", "groups_skipped_no_peer", "cosine",
      "invalid_rate", "trajectory_length",  "kl_mean",     "grad_norm"};
  return s;
}

void emit_plot_data(const std::vector<std::pair<std::string, std::string>>& metrics_files,
                    std::ostream& out) {
  out << "step,series,value\n";
  out.precision(17);
  for (const auto& [label, path] : metrics_files) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file '" + path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what(), e.byte, line_no);
      }
      if (!rec.contains("step")) throw ParseError(path + ": record without 'step'", 0, line_no);
      const auto step = rec.at("step").get<long long>();
      for (const auto& name : plot_series()) {
        out << step << ',' << (label.empty() ? name : label + "/" + name) << ',';
        if (rec.contains(name) && rec.at(name).is_number()) out << rec.at(name).get<double>();
        out << '\n';
      }
    }
  }
}

}  // namespace stepopsd
