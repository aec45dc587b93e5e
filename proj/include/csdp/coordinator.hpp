#pragma once

#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "csdp/belief.hpp"
#include "csdp/model.hpp"
#include "csdp/prescription.hpp"

namespace csdp {

// Value table over belief points, keyed by the quantized canonical form.
// Stored values and representative points keep full precision.
struct ValueFunction {
  Sense sense = Sense::minimize;
  double quantization = 1e-9;

  std::unordered_map<BeliefKey, double, BeliefKeyHash> table;
  std::vector<BeliefPoint> points;  // insertion order; drives deterministic output

  bool contains(const BeliefPoint& p) const {
    return table.count(belief_key(p, quantization)) > 0;
  }
  // Throws MissingSuccessor when the point is absent and snap is false;
  // with snap, falls back to the stored point nearest in L1 (same z preferred).
  double at(const BeliefPoint& p, bool snap = false) const;
  void set(const BeliefPoint& p, double v);
  std::size_t size() const { return points.size(); }
};

// Stationary policies have one layer; finite-horizon policies have one layer
// per stage, front() being the first stage.
struct CoordinatorPolicy {
  struct Layer {
    std::unordered_map<BeliefKey, Prescription, BeliefKeyHash> table;
    std::vector<BeliefPoint> points;
  };
  double quantization = 1e-9;
  bool stationary = true;
  std::vector<Layer> layers;

  const Prescription* find(int stage, const BeliefPoint& p) const;
  // Stationary lookup with optional L1 snap; throws MissingSuccessor when the
  // point is unknown and snap is false.
  const Prescription& at(const BeliefPoint& p, bool snap = false) const;
  void set(int stage, const BeliefPoint& p, Prescription d);
};

struct BackupOptions {
  std::uint64_t prescription_cap = 10'000'000;
  bool snap = false;     // map missing successors to the nearest stored point
  int stage = 0;         // cost tensor index for time-varying costs
  double quantization = 1e-9;
};

struct BackupResult {
  double value = 0.0;
  Prescription best;
};

// One Bellman backup at a belief point: optimizes over all joint
// prescriptions admissible at point.z the expectation
//   sum_x prod_i theta_i(x^i) [ c(z,x,d(x)) +
//     discount * sum_z' P(z'|z,d(x)) next(z', F(theta,z',d(x),d)) ].
// Minimizes or maximizes per the model's objective sense; ties break to the
// lexicographically first prescription. next_value == nullptr means a
// terminal backup (no continuation).
BackupResult bellman_backup(const CoupledModel& model, const BeliefPoint& point,
                            const ValueFunction* next_value, double discount,
                            const BackupOptions& opts = {});

struct ReachabilityOptions {
  std::size_t max_points = 100'000;
  double quantization = 1e-9;
  std::uint64_t prescription_cap = 10'000'000;
  // When set, only prescriptions accepted by the filter generate successors
  // (e.g. to drop actions known to be dominated). Backups are unaffected.
  std::function<bool(const Prescription&)> prescription_filter;
};

struct ReachableSet {
  std::vector<BeliefPoint> points;  // BFS order; canonical representatives
  bool truncated = false;
  std::vector<BeliefPoint> boundary;  // points with a successor outside the set

  bool contains(const BeliefPoint& p, double quantization) const;
};

// Breadth-first closure of the initial points under the filter successor maps
// (d, u, z'), with quantized canonicalization for membership. Truncation at
// max_points is reported, not fatal.
ReachableSet reachable_beliefs(const CoupledModel& model,
                               std::span<const BeliefPoint> initial,
                               const ReachabilityOptions& opts = {});
ReachableSet reachable_beliefs(const CoupledModel& model, const BeliefPoint& initial,
                               std::size_t max_points, double quantization = 1e-9);

struct FiniteHorizonResult {
  CoordinatorPolicy policy;  // one layer per stage
  double value = 0.0;        // expected total cost/reward from the initial law
  ValueFunction first_stage_values;
};

// Backward recursion of the coordinator dynamic program over the belief sets
// reached forward from the initial points. The returned value is the
// P_Z-expectation of the first-stage value.
FiniteHorizonResult solve_finite_horizon(const CoupledModel& model, int horizon,
                                         const BackupOptions& opts = {});

// Belief set for the infinite-horizon solvers: either an explicit set (must be
// filter-closed, or snap enabled) or a reachability closure from the model's
// initial points.
struct BeliefSetSpec {
  std::vector<BeliefPoint> explicit_points;
  ReachabilityOptions reach;
  bool snap = false;
};

struct DiscountedResult {
  ValueFunction value;
  CoordinatorPolicy policy;
  int iterations = 0;
};

// Value iteration for the discounted fixed point; stops when the sup-norm
// update is at most tol*(1-beta)/(2*beta). Backups reaching outside the set
// throw ClosureViolation unless spec.snap is set.
DiscountedResult solve_discounted(const CoupledModel& model, double discount,
                                  double tol, const BeliefSetSpec& spec = {},
                                  std::size_t max_iterations = 100'000);

struct AverageRewardResult {
  double gain = 0.0;
  ValueFunction relative_value;
  CoordinatorPolicy policy;
  int iterations = 0;
  double final_span = 0.0;
};

// Relative value iteration with the first initial belief point as reference.
// Iterates h <- T(h) - T(h)(ref) with an aperiodicity damping on the iterate
// (fixed points and the reported gain are those of the undamped operator);
// stops when the span seminorm of T(h) - h is at most tol, and returns
// gain = T(h)(ref). Throws NonConvergence past max_iterations.
AverageRewardResult solve_average_reward(const CoupledModel& model, double tol,
                                         const BeliefSetSpec& spec = {},
                                         std::size_t max_iterations = 100'000,
                                         double damping = 0.5);

}  // namespace csdp
