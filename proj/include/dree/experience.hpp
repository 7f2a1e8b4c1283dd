#pragma once

#include <vector>

#include "dree/policy.hpp"
#include "dree/vrp.hpp"

namespace dree {

/// A buffered instance together with the best objective found on it so far
/// and the construction trajectory (states implied, behaviours stored) that
/// achieved it.
struct Experience {
  Instance instance;
  double best_cost = 0.0;
  Trajectory best;
  int origin_epoch = 0;
  int enhancement_count = 0;
};

/// Experiences are buffered and sampled a batch at a time.
using ExperienceBatch = std::vector<Experience>;

}  // namespace dree
