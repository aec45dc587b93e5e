#pragma once

#include <string>
#include <vector>

#include "csdp/coordinator.hpp"
#include "csdp/mab.hpp"
#include "csdp/model.hpp"

namespace csdp {

struct SimReport {
  std::string policy_id;
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;
  double mean = 0.0;       // per-stage reward/cost
  double std_error = 0.0;  // batch-means standard error
  double ci_low = 0.0, ci_high = 0.0;
  int batches = 0;
  std::vector<std::vector<double>> visit_frequencies;  // [z][jx], sums to 1
  double max_belief_drift = 0.0;  // online vs offline recomputation spot checks
};

// Runs a stationary coordinator policy online: the belief evolves through the
// filter, prescriptions apply to the sampled true local states, and the
// realized joint actions feed back into the filter. Batch-means statistics
// over 100 batches; the online belief is re-derived from the recorded common
// information every 10^4 steps and the largest discrepancy is reported.
// Throws MissingSuccessor at a belief point the policy does not cover when
// snap is disabled.
SimReport simulate_policy(const CoupledModel& model, const CoordinatorPolicy& policy,
                          std::uint64_t steps, std::uint64_t seed, bool snap = false,
                          const std::string& policy_id = "coordinator");

// Same protocol for a multiaccess-broadcast solution, tracking the reachable
// set symbolically; beliefs past the truncation depth fold onto the limit
// states (the snap rule for this set).
SimReport simulate_policy(const mab::MabParams& params, const mab::MabSolution& solution,
                          std::uint64_t steps, std::uint64_t seed,
                          const std::string& policy_id = "mab");

}  // namespace csdp
