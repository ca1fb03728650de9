#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgp/kernel.hpp"

namespace dgp {

struct GradCheckConfig {
  Index n = 12;
  Index m = 4;
  Index q = 2;
  Index d = 2;
  std::uint64_t seed = 1;
  bool latent = true;  // false: regression, the local groups are skipped
  double step = 1e-5;
  double tolerance = 1e-4;
  // debug: negate the analytic gradient of this group before comparing
  std::string flip_group;
};

struct GroupCheck {
  std::string name;  // Z, log_alpha, log_sf2, log_beta, mu, log_S
  Index size = 0;
  double max_rel_err = 0.0;  // max |analytic - fd| / max |fd| over the group
  bool skipped = false;
  bool passed = false;
};

const std::vector<std::string>& gradient_groups();

// Central differences of F against the analytic gradient on a seeded random
// instance, per parameter group.
std::vector<GroupCheck> gradient_check(const GradCheckConfig& config);

}  // namespace dgp
