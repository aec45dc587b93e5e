#include "csdp/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace csdp {

namespace {

// Positive-probability successors of a point under one prescription:
// (u, z', theta', weight) with weight = P(u | theta, d) * P(z' | z, u).
struct Successor {
  std::vector<int> u;
  int z_next;
  BeliefPoint point;
  double weight;
};

// Expected immediate cost and the successor fan-out for one prescription.
// Enumerates joint local states exactly; groups by realized joint action.
struct PrescriptionEvaluation {
  double immediate = 0.0;
  std::vector<Successor> successors;  // omitted when wants_successors is false
};

PrescriptionEvaluation evaluate_prescription(const CoupledModel& m,
                                             const BeliefPoint& point,
                                             const Prescription& d, int stage,
                                             bool wants_successors) {
  const JointIndexer ux = m.u_indexer();
  const JointIndexer xx = m.x_indexer();
  PrescriptionEvaluation eval;

  // P(u | theta, d) from the product belief, plus expected cost per action.
  std::unordered_map<int, double> action_weight;
  std::vector<int> x(m.n, 0);
  int jx = 0;
  std::vector<int> u(m.n);
  do {
    double px = 1.0;
    for (int i = 0; i < m.n; ++i) px *= point.theta.theta[i][x[i]];
    if (px > 0.0) {
      for (int i = 0; i < m.n; ++i) u[i] = d.action(i, x[i]);
      const int ju = ux.index(u);
      eval.immediate += px * m.cost(stage, point.z, jx, ju);
      action_weight[ju] += px;
    }
    ++jx;
  } while (xx.next(x));

  if (!wants_successors) return eval;

  // Deterministic order over realized joint actions.
  std::vector<int> realized;
  realized.reserve(action_weight.size());
  for (const auto& [ju, w] : action_weight) realized.push_back(ju);
  std::sort(realized.begin(), realized.end());

  for (int ju : realized) {
    const double pu = action_weight[ju];
    const std::vector<int> uu = ux.digits(ju);
    // theta' does not depend on z' (the shared kernel has no x-dependence),
    // so one filter step serves every next shared state.
    BeliefVector theta_next = update_theta(m, point, d, uu, /*z_next=*/0);
    const Dist& zrow = m.shared_row(point.z, ju);
    for (int zn = 0; zn < m.z_size; ++zn) {
      if (zrow[zn] <= 0.0) continue;
      Successor s;
      s.u = uu;
      s.z_next = zn;
      s.point = BeliefPoint{zn, theta_next};
      s.weight = pu * zrow[zn];
      eval.successors.push_back(std::move(s));
    }
  }
  return eval;
}

bool better(Sense sense, double candidate, double incumbent) {
  return sense == Sense::minimize ? candidate < incumbent : candidate > incumbent;
}

}  // namespace

double ValueFunction::at(const BeliefPoint& p, bool snap) const {
  auto it = table.find(belief_key(p, quantization));
  if (it != table.end()) return it->second;
  if (!snap || points.empty())
    throw MissingSuccessor(cat("no value stored for belief point at z=", p.z));
  // Nearest stored point in L1; same-z points take precedence via a mismatch
  // penalty larger than any theta distance.
  double best = std::numeric_limits<double>::infinity();
  const BeliefPoint* arg = nullptr;
  for (const BeliefPoint& q : points) {
    double dist = (q.z == p.z) ? belief_l1(p, q) : 1e6;
    if (dist < best) {
      best = dist;
      arg = &q;
    }
  }
  return table.at(belief_key(*arg, quantization));
}

void ValueFunction::set(const BeliefPoint& p, double v) {
  BeliefKey key = belief_key(p, quantization);
  auto [it, inserted] = table.emplace(std::move(key), v);
  if (inserted)
    points.push_back(p);
  else
    it->second = v;
}

const Prescription* CoordinatorPolicy::find(int stage, const BeliefPoint& p) const {
  const Layer& layer = layers[stationary ? 0 : stage];
  auto it = layer.table.find(belief_key(p, quantization));
  return it == layer.table.end() ? nullptr : &it->second;
}

const Prescription& CoordinatorPolicy::at(const BeliefPoint& p, bool snap) const {
  const Layer& layer = layers.front();
  auto it = layer.table.find(belief_key(p, quantization));
  if (it != layer.table.end()) return it->second;
  if (!snap || layer.points.empty())
    throw MissingSuccessor(cat("policy undefined at belief point with z=", p.z));
  double best = std::numeric_limits<double>::infinity();
  const BeliefPoint* arg = nullptr;
  for (const BeliefPoint& q : layer.points) {
    double dist = (q.z == p.z) ? belief_l1(p, q) : 1e6;
    if (dist < best) {
      best = dist;
      arg = &q;
    }
  }
  return layer.table.at(belief_key(*arg, quantization));
}

void CoordinatorPolicy::set(int stage, const BeliefPoint& p, Prescription d) {
  if (static_cast<int>(layers.size()) <= stage) layers.resize(stage + 1);
  Layer& layer = layers[stage];
  BeliefKey key = belief_key(p, quantization);
  auto [it, inserted] = layer.table.emplace(std::move(key), std::move(d));
  if (inserted) layer.points.push_back(p);
}

BackupResult bellman_backup(const CoupledModel& m, const BeliefPoint& point,
                            const ValueFunction* next_value, double discount,
                            const BackupOptions& opts) {
  const auto prescriptions = enumerate_prescriptions(m, point.z, opts.prescription_cap);
  BackupResult result;
  bool first = true;
  for (const Prescription& d : prescriptions) {
    PrescriptionEvaluation eval =
        evaluate_prescription(m, point, d, opts.stage, next_value != nullptr);
    double value = eval.immediate;
    if (next_value != nullptr) {
      for (const Successor& s : eval.successors)
        value += discount * s.weight * next_value->at(s.point, opts.snap);
    }
    if (first || better(m.sense, value, result.value)) {
      result.value = value;
      result.best = d;
      first = false;
    }
  }
  if (first) throw Error("bellman_backup: no admissible prescription");
  return result;
}

bool ReachableSet::contains(const BeliefPoint& p, double quantization) const {
  const BeliefKey key = belief_key(p, quantization);
  for (const BeliefPoint& q : points)
    if (belief_key(q, quantization) == key) return true;
  return false;
}

ReachableSet reachable_beliefs(const CoupledModel& m,
                               std::span<const BeliefPoint> initial,
                               const ReachabilityOptions& opts) {
  ReachableSet set;
  std::unordered_map<BeliefKey, std::size_t, BeliefKeyHash> seen;
  std::deque<std::size_t> frontier;

  auto try_insert = [&](const BeliefPoint& p) -> bool {
    BeliefKey key = belief_key(p, opts.quantization);
    if (seen.count(key)) return true;
    if (set.points.size() >= opts.max_points) {
      set.truncated = true;
      return false;
    }
    seen.emplace(std::move(key), set.points.size());
    frontier.push_back(set.points.size());
    set.points.push_back(p);
    return true;
  };

  for (const BeliefPoint& p : initial) try_insert(p);

  std::vector<std::vector<Prescription>> prescriptions_by_z(m.z_size);
  std::vector<bool> have_z(m.z_size, false);

  std::vector<bool> is_boundary(set.points.size(), false);
  auto expand = [&](std::size_t idx, bool record_only) -> bool {
    // Returns true when every successor is inside the set.
    const BeliefPoint point = set.points[idx];  // copy: points may reallocate
    if (!have_z[point.z]) {
      prescriptions_by_z[point.z] =
          enumerate_prescriptions(m, point.z, opts.prescription_cap);
      have_z[point.z] = true;
    }
    bool closed = true;
    for (const Prescription& d : prescriptions_by_z[point.z]) {
      if (opts.prescription_filter && !opts.prescription_filter(d)) continue;
      PrescriptionEvaluation eval = evaluate_prescription(m, point, d, 0, true);
      for (const Successor& s : eval.successors) {
        if (record_only) {
          BeliefKey key = belief_key(s.point, opts.quantization);
          if (!seen.count(key)) closed = false;
        } else if (!try_insert(s.point)) {
          closed = false;
        }
      }
    }
    return closed;
  };

  while (!frontier.empty()) {
    std::size_t idx = frontier.front();
    frontier.pop_front();
    expand(idx, false);
  }

  // Boundary pass: any point with a successor outside the final set.
  for (std::size_t idx = 0; idx < set.points.size(); ++idx)
    if (!expand(idx, true)) set.boundary.push_back(set.points[idx]);

  return set;
}

ReachableSet reachable_beliefs(const CoupledModel& m, const BeliefPoint& initial,
                               std::size_t max_points, double quantization) {
  ReachabilityOptions opts;
  opts.max_points = max_points;
  opts.quantization = quantization;
  return reachable_beliefs(m, std::span<const BeliefPoint>(&initial, 1), opts);
}

FiniteHorizonResult solve_finite_horizon(const CoupledModel& m, int horizon,
                                         const BackupOptions& opts) {
  if (horizon < 0) throw Error("horizon must be nonnegative");
  if (m.time_varying_cost() &&
      static_cast<int>(m.stage_costs.size()) != horizon)
    throw Error(cat("model has ", m.stage_costs.size(), " stage cost tensors but horizon is ",
                    horizon));

  FiniteHorizonResult result;
  result.policy.stationary = false;
  result.policy.quantization = opts.quantization;
  result.first_stage_values.sense = m.sense;
  result.first_stage_values.quantization = opts.quantization;
  if (horizon == 0) return result;

  const auto initial = initial_belief_points(m);

  // Forward pass: belief sets reachable at each stage (under any prescription).
  std::vector<std::vector<BeliefPoint>> stage_points(horizon);
  {
    std::unordered_map<BeliefKey, bool, BeliefKeyHash> seen;
    for (const auto& wp : initial) {
      BeliefKey key = belief_key(wp.point, opts.quantization);
      if (!seen.emplace(std::move(key), true).second) continue;
      stage_points[0].push_back(wp.point);
    }
    for (int t = 0; t + 1 < horizon; ++t) {
      seen.clear();
      for (const BeliefPoint& p : stage_points[t]) {
        for (const Prescription& d :
             enumerate_prescriptions(m, p.z, opts.prescription_cap)) {
          PrescriptionEvaluation eval = evaluate_prescription(m, p, d, t, true);
          for (const Successor& s : eval.successors) {
            BeliefKey key = belief_key(s.point, opts.quantization);
            if (!seen.emplace(std::move(key), true).second) continue;
            stage_points[t + 1].push_back(s.point);
          }
        }
      }
    }
  }

  // Backward pass.
  result.policy.layers.resize(horizon);
  ValueFunction next;
  next.sense = m.sense;
  next.quantization = opts.quantization;
  for (int t = horizon - 1; t >= 0; --t) {
    ValueFunction current;
    current.sense = m.sense;
    current.quantization = opts.quantization;
    BackupOptions stage_opts = opts;
    stage_opts.stage = t;
    for (const BeliefPoint& p : stage_points[t]) {
      BackupResult r = bellman_backup(m, p, t + 1 < horizon ? &next : nullptr,
                                      /*discount=*/1.0, stage_opts);
      current.set(p, r.value);
      result.policy.set(t, p, std::move(r.best));
    }
    next = std::move(current);
  }

  result.first_stage_values = next;
  for (const auto& wp : initial)
    result.value += wp.prob * result.first_stage_values.at(wp.point);
  return result;
}

namespace {

struct IterationSet {
  std::vector<BeliefPoint> points;
};

IterationSet resolve_belief_set(const CoupledModel& m, const BeliefSetSpec& spec) {
  IterationSet set;
  if (!spec.explicit_points.empty()) {
    set.points = spec.explicit_points;
    return set;
  }
  const auto initial = initial_belief_points(m);
  std::vector<BeliefPoint> roots;
  roots.reserve(initial.size());
  for (const auto& wp : initial) roots.push_back(wp.point);
  ReachableSet reach = reachable_beliefs(m, roots, spec.reach);
  if (reach.truncated && !spec.snap)
    throw ClosureViolation(
        cat("reachable belief set truncated at ", reach.points.size(),
            " points and snap fallback is disabled"));
  set.points = std::move(reach.points);
  return set;
}

BackupResult closed_backup(const CoupledModel& m, const BeliefPoint& p,
                           const ValueFunction* next, double discount,
                           const BackupOptions& opts) {
  try {
    return bellman_backup(m, p, next, discount, opts);
  } catch (const MissingSuccessor& e) {
    throw ClosureViolation(cat("backup at a belief point with z=", p.z,
                               " left the belief set: ", e.what()));
  }
}

}  // namespace

DiscountedResult solve_discounted(const CoupledModel& m, double discount, double tol,
                                  const BeliefSetSpec& spec,
                                  std::size_t max_iterations) {
  if (!(discount > 0.0 && discount < 1.0))
    throw Error("discount must lie in (0,1)");
  if (m.time_varying_cost())
    throw Error("discounted solve requires a stationary cost");
  IterationSet set = resolve_belief_set(m, spec);

  DiscountedResult result;
  result.value.sense = m.sense;
  result.value.quantization = spec.reach.quantization;
  for (const BeliefPoint& p : set.points) result.value.set(p, 0.0);

  BackupOptions opts;
  opts.prescription_cap = spec.reach.prescription_cap;
  opts.snap = spec.snap;
  opts.quantization = spec.reach.quantization;

  const double stop = tol * (1.0 - discount) / (2.0 * discount);
  double delta = 0.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    ValueFunction next = result.value;
    delta = 0.0;
    for (const BeliefPoint& p : set.points) {
      BackupResult r = closed_backup(m, p, &result.value, discount, opts);
      delta = std::max(delta, std::abs(r.value - result.value.at(p)));
      next.set(p, r.value);
    }
    result.value = std::move(next);
    result.iterations = static_cast<int>(it) + 1;
    if (delta <= stop) {
      result.policy.stationary = true;
      result.policy.quantization = spec.reach.quantization;
      result.policy.layers.resize(1);
      for (const BeliefPoint& p : set.points) {
        BackupResult r = closed_backup(m, p, &result.value, discount, opts);
        result.policy.set(0, p, std::move(r.best));
      }
      return result;
    }
  }
  throw NonConvergence(cat("discounted value iteration did not reach ", stop, " after ",
                           max_iterations, " sweeps; last update ", delta),
                       delta);
}

AverageRewardResult solve_average_reward(const CoupledModel& m, double tol,
                                         const BeliefSetSpec& spec,
                                         std::size_t max_iterations, double damping) {
  if (m.time_varying_cost())
    throw Error("average-reward solve requires a stationary cost");
  IterationSet set = resolve_belief_set(m, spec);
  if (set.points.empty()) throw Error("empty belief set");

  AverageRewardResult result;
  result.relative_value.sense = m.sense;
  result.relative_value.quantization = spec.reach.quantization;
  for (const BeliefPoint& p : set.points) result.relative_value.set(p, 0.0);
  const BeliefPoint ref = set.points.front();
  const BeliefKey ref_key = belief_key(ref, spec.reach.quantization);

  BackupOptions opts;
  opts.prescription_cap = spec.reach.prescription_cap;
  opts.snap = spec.snap;
  opts.quantization = spec.reach.quantization;

  double span = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < max_iterations; ++it) {
    // Undamped application T(h); its one-step differences bracket the gain.
    std::vector<double> th(set.points.size());
    double diff_min = std::numeric_limits<double>::infinity();
    double diff_max = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < set.points.size(); ++k) {
      BackupResult r = closed_backup(m, set.points[k], &result.relative_value,
                                     /*discount=*/1.0, opts);
      th[k] = r.value;
      const double diff = th[k] - result.relative_value.at(set.points[k]);
      diff_min = std::min(diff_min, diff);
      diff_max = std::max(diff_max, diff);
    }
    span = diff_max - diff_min;
    result.iterations = static_cast<int>(it) + 1;

    double th_ref = 0.0;
    for (std::size_t k = 0; k < set.points.size(); ++k)
      if (belief_key(set.points[k], spec.reach.quantization) == ref_key) th_ref = th[k];

    if (span <= tol) {
      result.gain = th_ref;
      result.final_span = span;
      result.policy.stationary = true;
      result.policy.quantization = spec.reach.quantization;
      result.policy.layers.resize(1);
      for (const BeliefPoint& p : set.points) {
        BackupResult r =
            closed_backup(m, p, &result.relative_value, /*discount=*/1.0, opts);
        result.policy.set(0, p, std::move(r.best));
      }
      return result;
    }

    // Damped, reference-normalized iterate. The damping suppresses the
    // oscillation a periodic optimal chain induces in plain RVI; the fixed
    // point (up to the reference normalization) is unchanged.
    ValueFunction next;
    next.sense = m.sense;
    next.quantization = spec.reach.quantization;
    const double h_ref = result.relative_value.at(ref);
    const double norm = (1.0 - damping) * h_ref + damping * th_ref;
    for (std::size_t k = 0; k < set.points.size(); ++k) {
      const double h = result.relative_value.at(set.points[k]);
      next.set(set.points[k], (1.0 - damping) * h + damping * th[k] - norm);
    }
    result.relative_value = std::move(next);
  }
  throw NonConvergence(cat("relative value iteration span ", span, " above tol ", tol,
                           " after ", max_iterations, " sweeps"),
                       span);
}

}  // namespace csdp
