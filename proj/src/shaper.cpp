#include "stepopsd/shaper.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stepopsd/errors.hpp"

namespace stepopsd {

std::string_view normalization_name(Normalization n) {
  return n == Normalization::kEqualStepMeanAbs ? "equal_step_mean_abs" : "none";
}

std::optional<Normalization> parse_normalization(std::string_view name) {
  if (name == "equal_step_mean_abs") return Normalization::kEqualStepMeanAbs;
  if (name == "none") return Normalization::kNone;
  return std::nullopt;
}

void ShapingConfig::validate() const {
  if (!(lambda_mix_initial >= 0.0 && lambda_mix_initial < 1.0)) {
    throw ConfigError("lambda_mix_initial must be in [0, 1)");
  }
  if (!(alpha_clip > 0.0 && alpha_clip < 1.0)) throw ConfigError("alpha_clip must be in (0, 1)");
  if (decay_horizon < 1) throw ConfigError("decay_horizon must be at least 1");
  if (teacher_refresh_interval < 1) throw ConfigError("teacher_refresh_interval must be at least 1");
}

int sign_of(double a) { return (a > 0.0) - (a < 0.0); }

double raw_weight(int a_sign, double delta) {
  if (a_sign == 0) return 1.0;
  const double x = a_sign > 0 ? delta : -delta;
  return 2.0 / (1.0 + std::exp(-x));
}

double mean_abs(const std::vector<double>& m) {
  if (m.empty()) return 0.0;
  double s = 0.0;
  for (double v : m) s += std::abs(v);
  return s / static_cast<double>(m.size());
}

std::vector<std::vector<double>> normalize_equal_step(const std::vector<std::vector<double>>& steps) {
  std::vector<double> means(steps.size());
  double budget = 0.0;
  std::size_t eligible = 0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    means[k] = mean_abs(steps[k]);
    if (means[k] >= kEligibleMeanAbs) {
      budget += means[k];
      ++eligible;
    }
  }
  auto out = steps;
  if (eligible == 0) return out;
  budget /= static_cast<double>(eligible);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (means[k] < kEligibleMeanAbs) continue;
    const double scale = budget / means[k];
    for (auto& v : out[k]) v *= scale;
  }
  return out;
}

double clip_weight(double w, double alpha) { return std::clamp(w, 1.0 - alpha, 1.0 + alpha); }

double psi_of(double w_final, double lambda) { return 1.0 - lambda + lambda * w_final; }

double mix_advantage(double a_base, double w_final, double lambda) {
  return psi_of(w_final, lambda) * a_base;
}

double lambda_schedule(int step, const ShapingConfig& config) {
  if (step < 0) throw ConfigError("training step must be non-negative");
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(config.decay_horizon);
  return config.lambda_mix_initial * std::max(0.0, frac);
}

std::vector<ShapedAdvantage> shape_trajectory(const Trajectory& traj,
                                              const std::vector<StepSegment>& segments,
                                              const std::vector<GapRecord>& gaps,
                                              const std::vector<double>& token_advantages,
                                              double lambda, const ShapingConfig& config,
                                              bool shaped) {
  if (token_advantages.size() != traj.tokens.size()) {
    throw ConsistencyError("token advantages do not cover trajectory '" + traj.id + "'");
  }
  std::vector<ShapedAdvantage> out(traj.tokens.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].token_index = i;
    out[i].a_base = token_advantages[i];
    out[i].a_shaped = token_advantages[i];
  }
  if (!shaped) return out;

  // Pair every gap with its segment slot; any disagreement is a bug upstream.
  std::vector<std::vector<double>> mods(segments.size());
  std::vector<std::vector<std::size_t>> where(segments.size());
  std::size_t g = 0;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const auto& seg = segments[k];
    for (std::size_t j = 0; j < seg.span.length(); ++j) {
      if (!seg.included_mask[j]) continue;
      const std::size_t idx = seg.span.start() + j;
      if (g >= gaps.size() || gaps[g].token_index != idx) {
        throw ConsistencyError("gap records do not match step segments at token " +
                               std::to_string(idx));
      }
      if (idx >= out.size()) throw ConsistencyError("segment exceeds trajectory");
      auto& rec = out[idx];
      rec.step_index = seg.step_index;
      rec.delta = gaps[g].delta;
      rec.w_raw = raw_weight(sign_of(rec.a_base), rec.delta);
      mods[k].push_back(rec.w_raw - 1.0);
      where[k].push_back(idx);
      ++g;
    }
  }
  if (g != gaps.size()) throw ConsistencyError("more gap records than included tokens");

  if (config.normalization == Normalization::kEqualStepMeanAbs) mods = normalize_equal_step(mods);

  for (std::size_t k = 0; k < mods.size(); ++k) {
    for (std::size_t j = 0; j < mods[k].size(); ++j) {
      auto& rec = out[where[k][j]];
      rec.w_normalized = 1.0 + mods[k][j];
      rec.w_final = clip_weight(rec.w_normalized, config.alpha_clip);
      rec.psi = psi_of(rec.w_final, lambda);
      rec.a_shaped = rec.psi * rec.a_base;
    }
  }
  return out;
}

}  // namespace stepopsd
