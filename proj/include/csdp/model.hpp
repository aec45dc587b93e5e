#pragma once

#include <span>
#include <string>
#include <vector>

#include "csdp/common.hpp"

namespace csdp {

enum class Sense { minimize, maximize };

inline const char* to_string(Sense s) {
  return s == Sense::minimize ? "minimize" : "maximize";
}

// Mixed-radix index over a tuple of finite alphabets. Digit 0 is the most
// significant, so flat indices are row-major in subsystem order.
struct JointIndexer {
  std::vector<int> sizes;

  int total() const {
    int t = 1;
    for (int s : sizes) t *= s;
    return t;
  }

  int index(std::span<const int> digits) const {
    int idx = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) idx = idx * sizes[i] + digits[i];
    return idx;
  }

  std::vector<int> digits(int index) const {
    std::vector<int> d(sizes.size());
    for (std::size_t i = sizes.size(); i-- > 0;) {
      d[i] = index % sizes[i];
      index /= sizes[i];
    }
    return d;
  }

  // Odometer step over digit tuples; returns false after the last tuple.
  bool next(std::vector<int>& d) const {
    for (std::size_t i = sizes.size(); i-- > 0;) {
      if (++d[i] < sizes[i]) return true;
      d[i] = 0;
    }
    return false;
  }
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Finite-space coupled-subsystem model with control sharing. All dynamics are
// stored as stochastic kernels (plant noise integrated out). The local kernel
// of subsystem i is indexed by (z, x^i, u_joint) only; cross-subsystem state
// dependence is unrepresentable by construction.
struct CoupledModel {
  int n = 0;
  int z_size = 1;
  std::vector<int> x_sizes;
  std::vector<int> u_sizes;
  std::vector<int> y_sizes;  // empty unless partial observation

  // shared_kernel[z][ju] is a distribution over z'.
  std::vector<std::vector<Dist>> shared_kernel;
  // local_kernels[i][z][x][ju] is a distribution over x'.
  std::vector<std::vector<std::vector<std::vector<Dist>>>> local_kernels;
  // observation_kernels[i][x] is a distribution over y^i (partial model only).
  std::vector<std::vector<Dist>> observation_kernels;

  // stage_costs[k][z][jx][ju]; a single tensor means a stationary cost,
  // several tensors mean one per stage of a finite-horizon problem.
  std::vector<std::vector<std::vector<std::vector<double>>>> stage_costs;

  Sense sense = Sense::minimize;

  // feasible[i][z][x] is the sorted list of admissible actions of subsystem i.
  std::vector<std::vector<std::vector<std::vector<int>>>> feasible;

  Dist initial_shared;                           // over z
  std::vector<std::vector<Dist>> initial_local;  // [i][z] -> dist over x^i

  bool partial() const { return !observation_kernels.empty(); }
  bool time_varying_cost() const { return stage_costs.size() > 1; }

  JointIndexer u_indexer() const { return JointIndexer{u_sizes}; }
  JointIndexer x_indexer() const { return JointIndexer{x_sizes}; }

  // Stage index clamps to 0 for stationary costs.
  double cost(int stage, int z, int jx, int ju) const {
    const auto& tensor = stage_costs[time_varying_cost() ? stage : 0];
    return tensor[z][jx][ju];
  }

  const Dist& shared_row(int z, int ju) const { return shared_kernel[z][ju]; }
  const Dist& local_row(int i, int z, int x, int ju) const {
    return local_kernels[i][z][x][ju];
  }
  const std::vector<int>& feasible_at(int i, int z, int x) const {
    return feasible[i][z][x];
  }

  // Fills `feasible` with every action of every subsystem.
  void allow_all_actions();
};

ValidationReport validate_model(const CoupledModel& model);

// The stored stochastic row P(. | z, x_i, u_joint) of subsystem i.
// Throws IndexError when any index is out of range; the kernel is total in u,
// so feasibility of u is not required.
const Dist& transition_local(const CoupledModel& model, int i, int z, int x_i,
                             std::span<const int> u_joint);

struct Trajectory {
  std::vector<int> z;                  // length T
  std::vector<std::vector<int>> x;     // [t][i]
  std::vector<std::vector<int>> u;     // [t][i]
  std::vector<std::vector<int>> y;     // [t][i]; empty unless partial model
  std::vector<double> stage_cost;      // length T
  std::uint64_t seed = 0;

  int horizon() const { return static_cast<int>(z.size()); }
  double total_cost() const;
};

// A joint decision rule on full histories: at stage t station i sees
// z_{1:t}, its own local history (x^i_{1:t}, or y^i_{1:t} under partial
// observation), and all past joint actions u_{1:t-1}.
class JointStrategy {
 public:
  virtual ~JointStrategy() = default;
  virtual int act(const CoupledModel& model, int station, int t,
                  std::span<const int> z_hist, std::span<const int> own_hist,
                  std::span<const std::vector<int>> u_hist) const = 0;
};

// Samples one trajectory of the closed loop. Identical seeds give bit-exact
// identical trajectories. Throws InfeasibleAction naming (t, i, z, x, u) when
// the strategy leaves the admissible action set.
Trajectory sample_trajectory(const CoupledModel& model,
                             const JointStrategy& strategy, int horizon,
                             std::uint64_t seed);

}  // namespace csdp
