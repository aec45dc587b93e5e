#pragma once

#include <functional>
#include <map>
#include <vector>

#include "csdp/model.hpp"

namespace csdp::oracle {

// A finite model with a joint local kernel. Unlike CoupledModel, which cannot
// express cross-subsystem local dynamics by construction, this carrier admits
// them; that is what the negative-control instances need.
struct GeneralModel {
  int n = 0;
  int z_size = 1;
  std::vector<int> x_sizes, u_sizes, y_sizes;

  std::vector<std::vector<Dist>> shared_kernel;                  // [z][ju] -> z'
  std::vector<std::vector<std::vector<Dist>>> joint_local;       // [z][jx][ju] -> jx'
  std::vector<std::vector<Dist>> observation_kernels;            // [i][x] -> y
  std::vector<std::vector<std::vector<std::vector<double>>>> stage_costs;
  Sense sense = Sense::minimize;
  std::vector<std::vector<std::vector<std::vector<int>>>> feasible;  // [i][z][x]
  Dist initial_shared;
  std::vector<Dist> initial_local_joint;  // [z] -> dist over jx

  bool partial() const { return !observation_kernels.empty(); }
  JointIndexer u_indexer() const { return JointIndexer{u_sizes}; }
  JointIndexer x_indexer() const { return JointIndexer{x_sizes}; }
  double cost(int stage, int z, int jx, int ju) const {
    return stage_costs[stage_costs.size() > 1 ? stage : 0][z][jx][ju];
  }

  static GeneralModel from(const CoupledModel& model);
};

// One realization prefix: z and x (and y under partial observation) through
// some stage, joint actions through the previous stage. Stages are 1-based in
// the interfaces below.
struct Path {
  std::vector<int> z;
  std::vector<std::vector<int>> x;
  std::vector<std::vector<int>> y;
  std::vector<std::vector<int>> u;
};

// Joint decision rule on raw realization prefixes; measurability constraints
// are the builder's responsibility (StrategyTable enforces them per pattern).
using JointDecision = std::function<std::vector<int>(int t, const Path& prefix)>;

// Per-station decision rule, used to hold stations fixed in best responses.
using StationDecision = std::function<int(int station, int t, const Path& prefix)>;

// The exact law of (Z_{1:T}, X_{1:T}[, Y_{1:T}], U_{1:T}) under a fixed
// strategy, enumerated path by path.
struct ExactJoint {
  int n = 0;
  int T = 0;
  bool has_y = false;
  std::vector<std::pair<Path, double>> atoms;

  double total_mass() const {
    double s = 0.0;
    for (const auto& [p, w] : atoms) s += w;
    return s;
  }
};

ExactJoint exact_joint_distribution(const GeneralModel& model,
                                    const JointDecision& strategy, int T,
                                    std::size_t cap = 10'000'000);

// Max over t and positive-probability (z_{1:t}, u_{1:t}) of the deviation
// between the joint law of the local-state histories and the product of its
// per-subsystem marginals.
double check_conditional_independence(const ExactJoint& joint);

// Max violation of the controlled-Markov property of
// R^i_t = (X^i_t, Z_{1:t}, U_{1:t-1}) with control U^i_t, together with the
// one-step-cost sufficiency: conditioning on the full own-state history must
// not move either the next-R distribution or the expected stage cost.
double check_controlled_markov(const GeneralModel& model,
                               const JointDecision& strategy, int T,
                               std::size_t cap = 10'000'000);

// Product-form check on the exact per-station posteriors Xi^i_t (computed by
// enumeration, not by the recursive filter) given (z_{1:t}, u_{1:t}).
// Partial-observation models only.
double check_xi_independence(const GeneralModel& model, const JointDecision& strategy,
                             int T, std::size_t cap = 10'000'000);

// Controlled-Markov check of R^i_t = (Xi^i_t, Z_{1:t}, U_{1:t-1}) with control
// U^i_t, on partial-observation instances whose exact posteriors take finitely
// many values (always true at enumeration scale).
double check_controlled_markov_xi(const GeneralModel& model,
                                  const JointDecision& strategy, int T,
                                  std::size_t cap = 10'000'000);

enum class InfoPattern { kFullHistory, kReduced, kMarkov };

// Explicit deterministic strategy: per station and stage, a map from the
// encoded information realization to an action.
//   kFullHistory: (own_{1:t}, z_{1:t}, ju_{1:t-1})   own = x, or y when partial
//   kReduced:     (own_t, z_{1:t}, ju_{1:t-1})
//   kMarkov:      found under the (x_t, Pi_t)-measurability constraint; the
//                 selection is stored on the reduced domain.
struct StrategyTable {
  InfoPattern pattern = InfoPattern::kReduced;
  std::vector<std::vector<std::map<std::vector<int>, int>>> entries;  // [i][t-1]

  static std::vector<int> encode_info(InfoPattern pattern, int station, int t,
                                      const Path& prefix, bool partial);
  int act(int station, int t, const Path& prefix, bool partial) const;
  JointDecision decision(const GeneralModel& model) const;
};

struct BruteForceResult {
  double value = 0.0;
  StrategyTable strategy;
};

// Exact optimum over deterministic strategies of the given pattern.
// kReduced and kMarkov run an exhaustive prescription-tree search over common
// histories with exact conditional laws (equivalent to enumerating strategy
// tables, by additivity of expected cost across disjoint common histories);
// kFullHistory enumerates joint tables outright and is only viable for tiny
// instances. The cap bounds the work (evaluated node-prescription pairs, or
// the table count); CombinatorialBlowup carries the computed count.
BruteForceResult brute_force_optimal(const GeneralModel& model, int T,
                                     InfoPattern pattern,
                                     std::uint64_t cap = 10'000'000);

// Exact best response of one station against fixed strategies of the others:
// exhaustive over the station's maps at stages 1..T-1, with the final stage
// optimized pointwise per information realization.
BruteForceResult best_response(const GeneralModel& model, int station,
                               const StationDecision& others, int T,
                               InfoPattern pattern, std::uint64_t cap = 10'000'000);

// Swap dynamics (x1' = x2, x2' = x1): a cross-coupled instance on which both
// the conditional-independence and the controlled-Markov checks must fail.
GeneralModel counterexample_cross_coupled();

// Copy dynamics (x1' = x2, x2' = x2): the time-t conditional P(X_t | C_t) is
// not a product, so the belief factorization breaks.
GeneralModel counterexample_correlated();

struct RandomModelOptions {
  int n = 2;
  int z_size = 1;
  int x_size = 2;
  int u_size = 2;
  bool partial = false;
  int y_size = 2;
  int stages = 1;  // number of cost tensors; 1 = stationary
  bool restrict_feasibility = false;
  Sense sense = Sense::minimize;
};

// Random dense instance of the coupled form; all kernel entries positive.
CoupledModel random_model(const RandomModelOptions& opts, std::uint64_t seed);

// Random deterministic full-history strategy (total on all syntactic
// information realizations).
StrategyTable random_full_history_strategy(const GeneralModel& model, int T,
                                           std::uint64_t seed);

}  // namespace csdp::oracle
