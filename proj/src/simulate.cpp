#include "csdp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace csdp {

namespace {

struct BatchStats {
  std::uint64_t steps;
  int batches;
  std::uint64_t batch_size;
  std::vector<double> batch_sums;
  double total = 0.0;

  explicit BatchStats(std::uint64_t steps_in)
      : steps(steps_in),
        batches(static_cast<int>(
            std::min<std::uint64_t>(100, std::max<std::uint64_t>(steps_in, 1)))),
        batch_size(std::max<std::uint64_t>(steps_in / std::max(batches, 1), 1)),
        batch_sums(batches, 0.0) {}

  std::uint64_t used_steps() const { return batch_size * batches; }

  void add(std::uint64_t step, double reward) {
    total += reward;
    batch_sums[step / batch_size] += reward;
  }

  void finalize(SimReport& report) const {
    report.batches = batches;
    const double n = static_cast<double>(used_steps());
    report.mean = total / n;
    double var = 0.0;
    for (double s : batch_sums) {
      const double m = s / static_cast<double>(batch_size);
      var += (m - report.mean) * (m - report.mean);
    }
    var = batches > 1 ? var / (batches - 1) : 0.0;
    report.std_error = std::sqrt(var / batches);
    report.ci_low = report.mean - 1.96 * report.std_error;
    report.ci_high = report.mean + 1.96 * report.std_error;
  }
};

// Spot checks run every 10^4 steps early on, then geometrically, so the
// from-scratch recomputation stays linear in the trajectory length.
struct SpotSchedule {
  std::uint64_t next = 10'000;
  bool due(std::uint64_t completed) {
    if (completed != next) return false;
    next = next < 100'000 ? next + 10'000 : next * 2;
    return true;
  }
};

}  // namespace

SimReport simulate_policy(const CoupledModel& m, const CoordinatorPolicy& policy,
                          std::uint64_t steps, std::uint64_t seed, bool snap,
                          const std::string& policy_id) {
  if (!policy.stationary) throw Error("simulation requires a stationary policy");
  SimReport report;
  report.policy_id = policy_id;
  report.steps = steps;
  report.seed = seed;
  report.visit_frequencies.assign(m.z_size,
                                  std::vector<double>(m.x_indexer().total(), 0.0));
  if (steps == 0) return report;

  std::mt19937_64 rng(seed);
  const JointIndexer ux = m.u_indexer();
  const JointIndexer xx = m.x_indexer();
  BatchStats stats(steps);
  SpotSchedule spots;

  int z = sample_index(m.initial_shared, rng);
  std::vector<int> x(m.n);
  for (int i = 0; i < m.n; ++i) x[i] = sample_index(m.initial_local[i][z], rng);
  BeliefPoint belief;
  belief.z = z;
  belief.theta.theta.resize(m.n);
  for (int i = 0; i < m.n; ++i) belief.theta.theta[i] = m.initial_local[i][z];
  const BeliefPoint initial_belief = belief;

  // Compact common-information record (z_1, then u_t and z_{t+1} per step)
  // for the offline recomputation.
  std::vector<std::uint16_t> u_record;
  std::vector<std::uint16_t> z_record = {static_cast<std::uint16_t>(z)};
  bool record_ok = m.z_size < 65'536;
  for (int s : m.u_sizes) record_ok = record_ok && s < 65'536;
  if (record_ok) u_record.reserve(static_cast<std::size_t>(
      std::min<std::uint64_t>(stats.used_steps(), 20'000'000)) * m.n);

  std::vector<int> u(m.n), u_offline(m.n);
  for (std::uint64_t step = 0; step < stats.used_steps(); ++step) {
    const Prescription& d = policy.at(belief, snap);
    for (int i = 0; i < m.n; ++i) u[i] = d.action(i, x[i]);
    const int ju = ux.index(u);
    const int jx = xx.index(x);
    stats.add(step, m.cost(0, z, jx, ju));
    report.visit_frequencies[z][jx] += 1.0;

    const int z_next = sample_index(m.shared_row(z, ju), rng);
    std::vector<int> x_next(m.n);
    for (int i = 0; i < m.n; ++i)
      x_next[i] = sample_index(m.local_row(i, z, x[i], ju), rng);
    belief = BeliefPoint{z_next, update_theta(m, belief, d, u, z_next)};
    z = z_next;
    x = std::move(x_next);
    if (record_ok) {
      for (int i = 0; i < m.n; ++i) u_record.push_back(static_cast<std::uint16_t>(u[i]));
      z_record.push_back(static_cast<std::uint16_t>(z));
    }

    if (record_ok && spots.due(step + 1)) {
      BeliefPoint offline = initial_belief;
      for (std::uint64_t t = 0; t + 1 < z_record.size(); ++t) {
        const Prescription& dt = policy.at(offline, snap);
        for (int i = 0; i < m.n; ++i) u_offline[i] = u_record[t * m.n + i];
        offline = BeliefPoint{z_record[t + 1],
                              update_theta(m, offline, dt, u_offline, z_record[t + 1])};
      }
      report.max_belief_drift =
          std::max(report.max_belief_drift, belief_l1(belief, offline));
    }
  }

  for (auto& row : report.visit_frequencies)
    for (double& v : row) v /= static_cast<double>(stats.used_steps());
  stats.finalize(report);
  return report;
}

SimReport simulate_policy(const mab::MabParams& params, const mab::MabSolution& sol,
                          std::uint64_t steps, std::uint64_t seed,
                          const std::string& policy_id) {
  using mab::MabAction;
  using mab::RState;
  SimReport report;
  report.policy_id = policy_id;
  report.steps = steps;
  report.seed = seed;
  report.visit_frequencies.assign(1, std::vector<double>(4, 0.0));
  if (steps == 0) return report;

  std::mt19937_64 rng(seed);
  BatchStats stats(steps);
  SpotSchedule spots;

  int x1 = uniform01(rng) < params.p1 ? 1 : 0;
  int x2 = uniform01(rng) < params.p2 ? 1 : 0;
  RState state = RState::zero();

  // Per step: the schedule (2 bits would do) and the realized transmissions.
  std::vector<std::uint8_t> record;
  record.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(steps, 20'000'000)));

  for (std::uint64_t step = 0; step < stats.used_steps(); ++step) {
    const MabAction a = sol.action_at(state);
    const auto [s1, s2] = mab::to_pair(a);
    const int u1 = x1 * s1, u2 = x2 * s2;
    stats.add(step, (u1 ^ u2) ? 1.0 : 0.0);
    report.visit_frequencies[0][x1 * 2 + x2] += 1.0;

    // Success empties the buffer, a collision keeps it, arrivals refill.
    const int rem1 = std::max(x1 - u1 * (1 - u2), 0);
    const int rem2 = std::max(x2 - u2 * (1 - u1), 0);
    x1 = rem1 == 1 ? 1 : (uniform01(rng) < params.p1 ? 1 : 0);
    x2 = rem2 == 1 ? 1 : (uniform01(rng) < params.p2 ? 1 : 0);

    if (a == MabAction::kBoth)
      state = (u1 == 1 && u2 == 1) ? RState::star() : RState::zero();
    else
      state = mab::successor_deterministic(state, a, sol.n_max);
    record.push_back(static_cast<std::uint8_t>(static_cast<int>(a) << 2 | u1 << 1 | u2));

    if (spots.due(step + 1)) {
      // Re-derive the belief pair through the nonlinear filter and compare
      // with the symbolic state's coordinates.
      mab::QPair q{params.p1, params.p2};
      for (std::uint8_t r : record) {
        const auto [r1, r2] = mab::to_pair(static_cast<MabAction>(r >> 2));
        q = mab::mab_filter(params, q, {(r >> 1) & 1, r & 1}, {r1, r2});
      }
      const mab::QPair sq = mab::to_qpair(params, state);
      report.max_belief_drift = std::max(
          {report.max_belief_drift, std::abs(q.q1 - sq.q1), std::abs(q.q2 - sq.q2)});
    }
  }

  for (auto& row : report.visit_frequencies)
    for (double& v : row) v /= static_cast<double>(stats.used_steps());
  stats.finalize(report);
  return report;
}

}  // namespace csdp
