#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "csdp/model.hpp"
#include "csdp/prescription.hpp"

namespace csdp {

// Per-subsystem posteriors of the local states given common information.
struct BeliefVector {
  std::vector<Dist> theta;  // theta[i] over X^i
};

// The coordinator's DP state: the shared state paired with the belief vector.
struct BeliefPoint {
  int z = 0;
  BeliefVector theta;
};

// A single station's posterior over its own local state (partial model).
struct LocalBelief {
  int subsystem = 0;
  Dist xi;
};

// Joint posterior over (z, x_joint).
struct JointBelief {
  std::vector<std::vector<double>> p;  // p[z][jx]
  double total_mass() const {
    double s = 0.0;
    for (const auto& row : p)
      for (double v : row) s += v;
    return s;
  }
};

// Quantized canonical key; used for hashing and set membership only.
struct BeliefKey {
  int z = 0;
  std::vector<std::int64_t> q;
  bool operator==(const BeliefKey&) const = default;
};

struct BeliefKeyHash {
  std::size_t operator()(const BeliefKey& k) const {
    std::size_t h = std::hash<int>{}(k.z);
    for (std::int64_t v : k.q) hash_mix(h, std::hash<std::int64_t>{}(v));
    return h;
  }
};

BeliefKey belief_key(const BeliefPoint& point, double quantization = 1e-9);

// L1 distance between the concatenated theta vectors (z must match for the
// distance to be meaningful; callers compare within a fixed z).
double belief_l1(const BeliefPoint& a, const BeliefPoint& b);

// One step of the common-information filter: given the current point, the
// prescriptions the coordinator issued, the observed joint action, and the
// next shared state, returns the updated belief vector. Computed
// per-subsystem:
//   theta'_i(x') ~ sum_{x : d_i(x) = u_i} theta_i(x) P(x' | z, x, u),
// normalized. Throws InconsistentObservation when some subsystem's observed
// action has zero prior probability.
BeliefVector update_theta(const CoupledModel& model, const BeliefPoint& point,
                          const Prescription& prescriptions,
                          std::span<const int> u_observed, int z_next);

// Joint posterior reconstruction: Pi(z', x) = 1[z' = z] * prod_i theta_i(x^i).
JointBelief joint_from_theta(const CoupledModel& model, const BeliefPoint& point);

// One step of a single station's local filter (partial observation model):
//   xi'(x') ~ P(y_next | x') * sum_x xi(x) P(x' | z, x, u),
// normalized. Throws InconsistentObservation when the normalizer is zero.
LocalBelief update_xi(const CoupledModel& model, const LocalBelief& belief, int z,
                      std::span<const int> u_joint, int y_next);

struct WeightedBeliefPoint {
  BeliefPoint point;
  double prob = 1.0;
};

// The belief points the coordinator can start from: one per shared state with
// positive initial probability, with theta_i = P_{X^i|Z}(.|z).
std::vector<WeightedBeliefPoint> initial_belief_points(const CoupledModel& model);

}  // namespace csdp
