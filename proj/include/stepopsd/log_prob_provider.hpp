#pragma once

#include <span>
#include <string>
#include <vector>

#include "stepopsd/toy/policy_params.hpp"

namespace stepopsd {

using toy::PolicyParams;

// Teacher-forced scorer: log pi(realized[j] | context ++ realized[0..j)) in
// nats, one value per realized token. Implementations must be deterministic
// and re-entrant.
class LogProbProvider {
 public:
  virtual ~LogProbProvider() = default;

  virtual std::vector<double> score(const PolicyParams& params,
                                    std::span<const std::string> context,
                                    std::span<const std::string> realized) const = 0;
};

}  // namespace stepopsd
