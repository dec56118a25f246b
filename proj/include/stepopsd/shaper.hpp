#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "stepopsd/rescorer.hpp"
#include "stepopsd/step_extractor.hpp"
#include "stepopsd/trajectory.hpp"

namespace stepopsd {

enum class Normalization { kEqualStepMeanAbs, kNone };

std::string_view normalization_name(Normalization n);
std::optional<Normalization> parse_normalization(std::string_view name);

struct ShapingConfig {
  double lambda_mix_initial = 0.2;
  double alpha_clip = 0.2;
  int decay_horizon = 50;
  Normalization normalization = Normalization::kEqualStepMeanAbs;
  int teacher_refresh_interval = 10;

  // Throws ConfigError when a field is out of range.
  void validate() const;
};

struct ShapedAdvantage {
  std::size_t token_index = 0;
  std::optional<std::size_t> step_index;  // absent outside segments
  double a_base = 0.0;
  double delta = 0.0;
  double w_raw = 1.0;
  double w_normalized = 1.0;  // 1 + m' before clipping
  double w_final = 1.0;
  double psi = 1.0;
  double a_shaped = 0.0;

  bool operator==(const ShapedAdvantage&) const = default;
};

inline constexpr double kEligibleMeanAbs = 1e-8;

int sign_of(double a);

// 2 * sigmoid(a_sign * delta); exactly 1 for a_sign = 0.
double raw_weight(int a_sign, double delta);

// Rescales each eligible step's modifications to the common mean-abs budget.
std::vector<std::vector<double>> normalize_equal_step(const std::vector<std::vector<double>>& steps);

double mean_abs(const std::vector<double>& m);

double clip_weight(double w, double alpha);
double psi_of(double w_final, double lambda);
// (1 - lambda) * A + lambda * w * A, computed as psi * A.
double mix_advantage(double a_base, double w_final, double lambda);

double lambda_schedule(int step, const ShapingConfig& config);

// `gaps` must list exactly the included tokens of `segments`, in order.
// With `shaped` false every token gets psi = 1.
std::vector<ShapedAdvantage> shape_trajectory(const Trajectory& traj,
                                              const std::vector<StepSegment>& segments,
                                              const std::vector<GapRecord>& gaps,
                                              const std::vector<double>& token_advantages,
                                              double lambda, const ShapingConfig& config,
                                              bool shaped = true);

}  // namespace stepopsd
