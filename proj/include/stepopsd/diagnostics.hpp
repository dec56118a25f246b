#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stepopsd/grpo.hpp"

namespace stepopsd {

// Streaming count / mean / sum of squared deviations (Welford), mergeable.
struct DeltaStats {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  void merge(const DeltaStats& other);
  // Population standard deviation; absent when empty.
  std::optional<double> stddev() const;
};

struct WindowStat {
  int begin = 0;
  std::optional<int> end;  // exclusive; open-ended for the last window
  std::size_t count = 0;
  std::optional<double> mean;
  std::optional<double> stddev;
  bool empty = true;
};

// Windows [b0, b1), [b1, b2), ..., [b_last, inf). `per_step[i]` holds the Δ
// statistics of step `steps[i]`. Boundaries must be strictly increasing.
std::vector<WindowStat> diag_std_delta(const std::vector<int>& steps,
                                       const std::vector<DeltaStats>& per_step,
                                       const std::vector<int>& boundaries);

// Same from raw (step, delta) pairs.
std::vector<WindowStat> diag_std_delta_raw(const std::vector<std::pair<int, double>>& deltas,
                                           const std::vector<int>& boundaries);

struct SignReport {
  std::size_t cases = 0;
  std::size_t violations = 0;
  double min_psi = 0.0;
  double max_psi = 0.0;
  std::optional<std::string> counterexample;
  bool passed() const { return violations == 0; }
};

// Samples A in [-5, 5] (with exact zeros), delta in [-30, 30], lambda in
// [0, 1), alpha in (0, 1). With fixed_lambda/fixed_alpha set, those are held.
SignReport verify_sign_preservation(std::size_t n, std::uint64_t seed,
                                    std::optional<double> fixed_lambda = std::nullopt,
                                    std::optional<double> fixed_alpha = std::nullopt);

struct VarianceTestConfig {
  std::size_t n = 100000;
  double a_star_mean = 0.0;
  double a_star_sd = 1.0;
  double sigma = 1.0;     // noise on the observed advantage
  double lambda = 0.5;
  double alpha = 0.9;
  double fidelity = 1.0;  // delta = fidelity * A*
  std::uint64_t seed = 20240601;
};

struct VarianceReport {
  double var_base = 0.0;
  double var_shaped = 0.0;
  double ratio = 1.0;  // var_shaped / var_base
  std::size_t sign_mismatches = 0;
  bool passed() const { return var_shaped < var_base; }
};

VarianceReport verify_variance_bound(const VarianceTestConfig& cfg);

struct AlignmentReport {
  std::optional<double> cosine;  // absent when either gradient has zero norm
  bool zero_norm = false;
  std::size_t tokens = 0;
  double max_proportionality_error = 0.0;  // relative, over all tokens and entries
  bool proportional = true;
};

// Full-batch g_RL (base advantages) vs g_shaped (shaped advantages), plus the
// per-token check that each shaped contribution equals psi times the
// unshaped one.
AlignmentReport measure_gradient_alignment(const std::vector<TokenTerm>& terms,
                                           const std::vector<std::vector<double>>& base,
                                           const std::vector<std::vector<double>>& shaped,
                                           std::size_t vocab_size, double tolerance = 1e-12);

double cosine_similarity(const SparseGradient& a, const SparseGradient& b);

// Tidy `step,series,value` CSV. Each input is (label, metrics JSONL path);
// with a non-empty label series names are prefixed `label/`.
void emit_plot_data(const std::vector<std::pair<std::string, std::string>>& metrics_files,
                    std::ostream& out);

const std::vector<std::string>& plot_series();

}  // namespace stepopsd
