#pragma once

#include <cstdint>
#include <vector>

#include "csdp/model.hpp"

namespace csdp {

// A joint prescription: for each subsystem a total map from its local state
// to an action, admissible at the shared state it was enumerated for.
// Comparison is lexicographic over (subsystem, local state).
struct Prescription {
  std::vector<std::vector<int>> maps;  // maps[i][x] = u

  int action(int i, int x) const { return maps[i][x]; }

  // Joint action selected at joint local state jx.
  std::vector<int> joint_action(const JointIndexer& x_indexer,
                                std::span<const int> x_joint) const {
    std::vector<int> u(maps.size());
    (void)x_indexer;
    for (std::size_t i = 0; i < maps.size(); ++i) u[i] = maps[i][x_joint[i]];
    return u;
  }

  bool operator==(const Prescription&) const = default;
  auto operator<=>(const Prescription&) const = default;
};

// Number of joint prescriptions at shared state z (saturating at 2^64-1).
std::uint64_t count_prescriptions(const CoupledModel& model, int z);

// All joint prescriptions at z, duplicate-free, in lexicographic order over
// (subsystem, local state) with actions taken from the sorted feasible sets.
// Throws CombinatorialBlowup when the count exceeds `cap`.
std::vector<Prescription> enumerate_prescriptions(const CoupledModel& model, int z,
                                                  std::uint64_t cap = 10'000'000);

}  // namespace csdp
