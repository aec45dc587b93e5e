#pragma once

#include <array>
#include <string>
#include <vector>

#include "csdp/model.hpp"

namespace csdp::mab {

struct MabParams {
  double p1 = 0.0;  // arrival probability at user 1
  double p2 = 0.0;  // arrival probability at user 2
  bool symmetric() const { return p1 == p2; }
};

// Pair of queue-occupancy beliefs P(buffer nonempty | common information).
struct QPair {
  double q1 = 0.0;
  double q2 = 0.0;
};

// The three undominated transmission schedules s = (s1, s2); (0,0) is
// dominated by (1,0). Order matches the value-action display (v10, v01, v11)
// and fixes tie-breaking.
enum class MabAction { kFirstOnly, kSecondOnly, kBoth };

inline std::pair<int, int> to_pair(MabAction a) {
  switch (a) {
    case MabAction::kFirstOnly: return {1, 0};
    case MabAction::kSecondOnly: return {0, 1};
    default: return {1, 1};
  }
}

constexpr std::array<MabAction, 3> kMabActions = {
    MabAction::kFirstOnly, MabAction::kSecondOnly, MabAction::kBoth};

// Symbolic index into the countable reachable set:
//   Star       = (1, 1)
//   Zero       = (p1, p2)
//   N(side, n) = user `side`'s belief elevated to A^n p, the other at p
//   Infty(side)= user `side`'s belief at 1, the other at p
struct RState {
  enum class Tag { Star, Zero, N, Infty };
  Tag tag = Tag::Zero;
  int side = 0;  // 1 or 2 for N / Infty
  int n = 0;     // >= 1 for N

  static RState star() { return {Tag::Star, 0, 0}; }
  static RState zero() { return {Tag::Zero, 0, 0}; }
  static RState elevated(int side, int n) { return {Tag::N, side, n}; }
  static RState infty(int side) { return {Tag::Infty, side, 0}; }

  bool operator==(const RState&) const = default;
};

std::string to_string(const RState& s);
QPair to_qpair(const MabParams& params, const RState& s);

// Two-user multiaccess broadcast system as a coupled model: singleton shared
// state, binary buffers and transmissions, feasibility u <= x, reward
// u1 XOR u2 maximized. Buffer dynamics x' = min(max(x - u*(1-u_other), 0) + w, 1)
// with Bernoulli(p^i) arrivals w integrated into the kernel.
CoupledModel mab_model(const MabParams& params);

// The arrival-smoothing operator iterated n times:
// A_i^n q = 1 - (1-p^i)^n (1-q); n = 0 is the identity.
double apply_A(const MabParams& params, int user, double q, int n);

// The five-branch belief update driven by the schedule s and the observed
// transmissions u. Throws Error when u is inconsistent with s (u_i = 1
// requires s_i = 1).
QPair mab_filter(const MabParams& params, const QPair& q, std::pair<int, int> u,
                 std::pair<int, int> s);

struct ConsistencyReport {
  std::vector<std::string> mismatches;
  double max_error = 0.0;
  bool ok() const { return mismatches.empty(); }
};

// Checks that the generic belief filter on mab_model agrees with mab_filter
// within 1e-12 across sampled beliefs and all positive-probability (s, u).
ConsistencyReport validate_mab_consistency(const MabParams& params, int samples = 100,
                                           std::uint64_t seed = 1);
ConsistencyReport validate_mab_consistency(const MabParams& params,
                                           const CoupledModel& model, int samples,
                                           std::uint64_t seed);

// The countable reachable set truncated at n_max, ordered
// (Star, Zero, N(1,1..n_max), N(2,1..n_max), Infty(1), Infty(2)); states whose
// belief coordinates coincide within 1e-9 are collapsed onto the first
// occurrence. N(i, n > n_max) folds into Infty(i) in all successor maps.
std::vector<RState> reachable_set(const MabParams& params, int n_max);

struct MabSolution {
  enum class Provenance { kClosedForm, kRvi };

  MabParams params;
  int n_max = 0;
  double gain = 0.0;
  std::vector<RState> states;
  std::vector<double> values;      // aligned with states
  std::vector<MabAction> policy;   // aligned with states
  Provenance provenance = Provenance::kRvi;

  int index_of(const RState& s) const;
  double value_at(const RState& s) const;
  MabAction action_at(const RState& s) const;
};

// Successor of a reachable state under a schedule. Schedules (1,0) and (0,1)
// have a deterministic successor; (1,1) resolves to Star on collision and
// Zero otherwise.
RState successor_deterministic(const RState& s, MabAction a, int n_max);
struct BothOutcome {
  double collision_prob;  // q1*q2, reaching Star
  RState on_collision;
  RState otherwise;
};
BothOutcome successor_both(const MabParams& params, const RState& s);

// Relative value iteration over the truncated reachable set with the three
// undominated schedules; reference state Zero. Stops when the span of
// T(h) - h is at most tol; gain = T(h)(ref). Throws NonConvergence past the
// iteration cap.
MabSolution mab_relative_vi(const MabParams& params, int n_max, double tol,
                            std::size_t max_iterations = 100'000,
                            double damping = 0.5);

// Threshold polynomial phi_n(x) = 1 + (1-x)^2 - (3+x)(1-x)^{n+1}, evaluated
// in factored form.
double phi(int n, double x);
// Its root in [0,1], by bisection on the sign change phi_n(0) = -1,
// phi_n(1) = 1.
double alpha_root(int n, double tol = 1e-12);
// Root of x = (1-x)^2 in [0,1], in closed form.
double tau();

// Closed-form solution for symmetric arrivals, selecting among the three
// half-open parameter ranges (tau,1], (alpha_1,tau], (alpha_{m+1},alpha_m].
// Throws Error for p outside (0,1] or below the configured alpha depth.
MabSolution closed_form(double p, int n_max, int max_alpha_depth = 100'000);

struct FixedPointReport {
  struct Entry {
    std::string index;  // "*", "0", "1".."n_max", "inf"
    double residual = 0.0;
    bool maximizer_ok = true;
    double a = 0.0, b = 0.0, c = 0.0;
  };
  std::vector<Entry> entries;
  double max_residual = 0.0;
  int maximizer_mismatches = 0;
  bool ok(double tol) const { return max_residual <= tol && maximizer_mismatches == 0; }
};

// Recomputes the value-action table (a^n, b^n, c^n) from a solution's values
// and checks v^n + J* = max{a^n, b^n, c^n} at every index of
// {*, 0, 1..n_max, inf}, and that the maximizer set contains the solution's
// action there. v^{n_max+1} folds to v^inf. Symmetric arrivals only.
FixedPointReport verify_fixed_point(double p, const MabSolution& sol, int n_max,
                                    double tol);

}  // namespace csdp::mab
