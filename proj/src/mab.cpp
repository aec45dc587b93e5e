#include "csdp/mab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csdp/belief.hpp"
#include "csdp/prescription.hpp"

namespace csdp::mab {

namespace {

constexpr int kLevelInf = std::numeric_limits<int>::max();

// Belief levels: user i's belief is p (level 0), A^n p (level n), or 1
// (level infinity). Every reachable state has at least one side at level 0
// or both at infinity.
struct Levels {
  int l1 = 0;
  int l2 = 0;
};

Levels levels_of(const RState& s) {
  switch (s.tag) {
    case RState::Tag::Star: return {kLevelInf, kLevelInf};
    case RState::Tag::Zero: return {0, 0};
    case RState::Tag::N: return s.side == 1 ? Levels{s.n, 0} : Levels{0, s.n};
    default: return s.side == 1 ? Levels{kLevelInf, 0} : Levels{0, kLevelInf};
  }
}

RState state_of(Levels l) {
  if (l.l1 == kLevelInf && l.l2 == kLevelInf) return RState::star();
  if (l.l1 == 0 && l.l2 == 0) return RState::zero();
  if (l.l2 == 0) return l.l1 == kLevelInf ? RState::infty(1) : RState::elevated(1, l.l1);
  return l.l2 == kLevelInf ? RState::infty(2) : RState::elevated(2, l.l2);
}

int bump(int level, int n_max) {
  if (level == kLevelInf) return kLevelInf;
  return level + 1 > n_max ? kLevelInf : level + 1;
}

double level_value(const MabParams& p, int user, int level) {
  if (level == kLevelInf) return 1.0;
  return apply_A(p, user, user == 1 ? p.p1 : p.p2, level == 0 ? 0 : level);
}

}  // namespace

std::string to_string(const RState& s) {
  switch (s.tag) {
    case RState::Tag::Star: return "star";
    case RState::Tag::Zero: return "zero";
    case RState::Tag::N: return cat("n(", s.side, ",", s.n, ")");
    default: return cat("infty(", s.side, ")");
  }
}

QPair to_qpair(const MabParams& params, const RState& s) {
  const Levels l = levels_of(s);
  return {level_value(params, 1, l.l1), level_value(params, 2, l.l2)};
}

CoupledModel mab_model(const MabParams& params) {
  if (params.p1 < 0.0 || params.p1 > 1.0 || params.p2 < 0.0 || params.p2 > 1.0)
    throw Error("arrival probabilities must lie in [0,1]");
  CoupledModel m;
  m.n = 2;
  m.z_size = 1;
  m.x_sizes = {2, 2};
  m.u_sizes = {2, 2};
  m.sense = Sense::maximize;

  const JointIndexer ux{{2, 2}};
  m.shared_kernel.assign(1, std::vector<Dist>(ux.total(), Dist{1.0}));

  const double arrivals[2] = {params.p1, params.p2};
  m.local_kernels.assign(2, {});
  for (int i = 0; i < 2; ++i) {
    const double p = arrivals[i];
    m.local_kernels[i].assign(1, {});
    m.local_kernels[i][0].assign(2, std::vector<Dist>(ux.total()));
    for (int x = 0; x < 2; ++x) {
      for (int ju = 0; ju < ux.total(); ++ju) {
        const auto u = ux.digits(ju);
        const int own = u[i], other = u[1 - i];
        // Transmission removes the packet only without collision; a full
        // buffer drops the arrival.
        const int after_tx = std::max(x - own * (1 - other), 0);
        Dist row(2, 0.0);
        if (after_tx == 1) {
          row[1] = 1.0;
        } else {
          row[0] = 1.0 - p;
          row[1] = p;
        }
        m.local_kernels[i][0][x][ju] = row;
      }
    }
  }

  // Reward: one packet goes through iff exactly one user transmits.
  const JointIndexer xx{{2, 2}};
  m.stage_costs.assign(1, {});
  m.stage_costs[0].assign(1, std::vector<std::vector<double>>(
                                 xx.total(), std::vector<double>(ux.total(), 0.0)));
  for (int jx = 0; jx < xx.total(); ++jx)
    for (int ju = 0; ju < ux.total(); ++ju) {
      const auto u = ux.digits(ju);
      m.stage_costs[0][0][jx][ju] = (u[0] ^ u[1]) ? 1.0 : 0.0;
    }

  // Only u <= x is admissible.
  m.feasible.assign(2, {});
  for (int i = 0; i < 2; ++i) {
    m.feasible[i].assign(1, {});
    m.feasible[i][0] = {{0}, {0, 1}};
  }

  m.initial_shared = {1.0};
  m.initial_local.assign(2, {});
  for (int i = 0; i < 2; ++i)
    m.initial_local[i] = {{1.0 - arrivals[i], arrivals[i]}};
  return m;
}

double apply_A(const MabParams& params, int user, double q, int n) {
  if (user != 1 && user != 2) throw IndexError(cat("user ", user, " out of range"));
  if (n < 0) throw IndexError("n must be nonnegative");
  const double p = user == 1 ? params.p1 : params.p2;
  return 1.0 - std::pow(1.0 - p, n) * (1.0 - q);
}

QPair mab_filter(const MabParams& params, const QPair& q, std::pair<int, int> u,
                 std::pair<int, int> s) {
  if ((u.first == 1 && s.first != 1) || (u.second == 1 && s.second != 1))
    throw Error(cat("transmission u=(", u.first, ",", u.second,
                    ") inconsistent with schedule s=(", s.first, ",", s.second, ")"));
  if (s == std::pair<int, int>{0, 0})
    return {apply_A(params, 1, q.q1, 1), apply_A(params, 2, q.q2, 1)};
  if (s == std::pair<int, int>{1, 0}) return {params.p1, apply_A(params, 2, q.q2, 1)};
  if (s == std::pair<int, int>{0, 1}) return {apply_A(params, 1, q.q1, 1), params.p2};
  if (u == std::pair<int, int>{1, 1}) return {1.0, 1.0};
  return {params.p1, params.p2};
}

namespace {

Prescription schedule_prescription(std::pair<int, int> s) {
  Prescription d;
  d.maps = {{0, s.first}, {0, s.second}};
  return d;
}

}  // namespace

ConsistencyReport validate_mab_consistency(const MabParams& params, int samples,
                                           std::uint64_t seed) {
  return validate_mab_consistency(params, mab_model(params), samples, seed);
}

ConsistencyReport validate_mab_consistency(const MabParams& params,
                                           const CoupledModel& model, int samples,
                                           std::uint64_t seed) {
  ConsistencyReport report;
  std::mt19937_64 rng(seed);
  std::vector<QPair> qs = {{params.p1, params.p2}, {1.0, 1.0}, {params.p1, 1.0},
                           {1.0, params.p2},       {0.0, 0.0}, {0.5, 0.5}};
  for (int k = 0; k < samples; ++k) qs.push_back({uniform01(rng), uniform01(rng)});

  const std::pair<int, int> schedules[4] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  for (const QPair& q : qs) {
    BeliefPoint point;
    point.z = 0;
    point.theta.theta = {{1.0 - q.q1, q.q1}, {1.0 - q.q2, q.q2}};
    for (const auto& s : schedules) {
      for (int u1 = 0; u1 <= s.first; ++u1) {
        for (int u2 = 0; u2 <= s.second; ++u2) {
          // Skip transmissions with zero prior probability.
          const double pu1 = s.first ? (u1 ? q.q1 : 1.0 - q.q1) : 1.0;
          const double pu2 = s.second ? (u2 ? q.q2 : 1.0 - q.q2) : 1.0;
          if (pu1 <= 0.0 || pu2 <= 0.0) continue;
          const QPair expected = mab_filter(params, q, {u1, u2}, s);
          const std::vector<int> u = {u1, u2};
          const BeliefVector got =
              update_theta(model, point, schedule_prescription(s), u, 0);
          const double e1 = std::abs(got.theta[0][1] - expected.q1);
          const double e2 = std::abs(got.theta[1][1] - expected.q2);
          const double err = std::max(e1, e2);
          report.max_error = std::max(report.max_error, err);
          if (err > 1e-12)
            report.mismatches.push_back(
                cat("q=(", q.q1, ",", q.q2, ") s=(", s.first, ",", s.second, ") u=(", u1,
                    ",", u2, "): filter (", expected.q1, ",", expected.q2, ") vs theta (",
                    got.theta[0][1], ",", got.theta[1][1], ")"));
        }
      }
    }
  }
  return report;
}

std::vector<RState> reachable_set(const MabParams& params, int n_max) {
  if (n_max < 1) throw Error("n_max must be at least 1");
  std::vector<RState> ordered;
  ordered.push_back(RState::star());
  ordered.push_back(RState::zero());
  for (int side = 1; side <= 2; ++side)
    for (int n = 1; n <= n_max; ++n) ordered.push_back(RState::elevated(side, n));
  ordered.push_back(RState::infty(1));
  ordered.push_back(RState::infty(2));

  // Collapse states whose belief coordinates coincide (e.g. p = 1 makes every
  // A^n p equal to 1).
  std::vector<RState> out;
  std::vector<std::pair<std::int64_t, std::int64_t>> seen;
  for (const RState& s : ordered) {
    const QPair q = to_qpair(params, s);
    const std::pair<std::int64_t, std::int64_t> key = {quantize(q.q1, 1e-9),
                                                       quantize(q.q2, 1e-9)};
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    out.push_back(s);
  }
  return out;
}

int MabSolution::index_of(const RState& s) const {
  for (std::size_t k = 0; k < states.size(); ++k)
    if (states[k] == s) return static_cast<int>(k);
  // States whose coordinates coincide were collapsed; match by coordinates.
  const QPair q = to_qpair(params, s);
  const auto key = std::make_pair(quantize(q.q1, 1e-9), quantize(q.q2, 1e-9));
  for (std::size_t k = 0; k < states.size(); ++k) {
    const QPair qs = to_qpair(params, states[k]);
    if (std::make_pair(quantize(qs.q1, 1e-9), quantize(qs.q2, 1e-9)) == key)
      return static_cast<int>(k);
  }
  return -1;
}

double MabSolution::value_at(const RState& s) const {
  const int k = index_of(s);
  if (k < 0) throw IndexError(cat("state ", to_string(s), " not in solution"));
  return values[k];
}

MabAction MabSolution::action_at(const RState& s) const {
  const int k = index_of(s);
  if (k < 0) throw IndexError(cat("state ", to_string(s), " not in solution"));
  return policy[k];
}

RState successor_deterministic(const RState& s, MabAction a, int n_max) {
  const Levels l = levels_of(s);
  if (a == MabAction::kFirstOnly) return state_of({0, bump(l.l2, n_max)});
  if (a == MabAction::kSecondOnly) return state_of({bump(l.l1, n_max), 0});
  throw Error("schedule (1,1) has a stochastic successor");
}

BothOutcome successor_both(const MabParams& params, const RState& s) {
  const QPair q = to_qpair(params, s);
  return {q.q1 * q.q2, RState::star(), RState::zero()};
}

namespace {

struct RviTables {
  // Successor indices per state for the deterministic schedules, plus the
  // collision probability for (1,1).
  std::vector<int> succ_first, succ_second;
  std::vector<double> collision;
  std::vector<QPair> q;
  int star_idx = -1, zero_idx = -1;
};

int index_by_coords(const MabParams& params, const std::vector<RState>& states,
                    const RState& target) {
  const QPair tq = to_qpair(params, target);
  const auto key = std::make_pair(quantize(tq.q1, 1e-9), quantize(tq.q2, 1e-9));
  for (std::size_t k = 0; k < states.size(); ++k) {
    const QPair q = to_qpair(params, states[k]);
    if (std::make_pair(quantize(q.q1, 1e-9), quantize(q.q2, 1e-9)) == key)
      return static_cast<int>(k);
  }
  throw Error(cat("state ", to_string(target), " missing from reachable set"));
}

RviTables build_tables(const MabParams& params, const std::vector<RState>& states,
                       int n_max) {
  RviTables t;
  t.star_idx = index_by_coords(params, states, RState::star());
  t.zero_idx = index_by_coords(params, states, RState::zero());
  for (const RState& s : states) {
    t.q.push_back(to_qpair(params, s));
    t.succ_first.push_back(index_by_coords(
        params, states, successor_deterministic(s, MabAction::kFirstOnly, n_max)));
    t.succ_second.push_back(index_by_coords(
        params, states, successor_deterministic(s, MabAction::kSecondOnly, n_max)));
    t.collision.push_back(successor_both(params, s).collision_prob);
  }
  return t;
}

// Value of each schedule given the current relative values.
std::array<double, 3> action_values(const RviTables& t, const std::vector<double>& h,
                                    std::size_t k) {
  const double q1 = t.q[k].q1, q2 = t.q[k].q2;
  return {q1 + h[t.succ_first[k]], q2 + h[t.succ_second[k]],
          q1 + q2 - 2.0 * q1 * q2 + t.collision[k] * h[t.star_idx] +
              (1.0 - t.collision[k]) * h[t.zero_idx]};
}

}  // namespace

MabSolution mab_relative_vi(const MabParams& params, int n_max, double tol,
                            std::size_t max_iterations, double damping) {
  MabSolution sol;
  sol.params = params;
  sol.n_max = n_max;
  sol.provenance = MabSolution::Provenance::kRvi;
  sol.states = reachable_set(params, n_max);
  const RviTables t = build_tables(params, sol.states, n_max);
  const std::size_t count = sol.states.size();
  const int ref = t.zero_idx;

  std::vector<double> h(count, 0.0), th(count, 0.0);
  double span = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < max_iterations; ++it) {
    double diff_min = std::numeric_limits<double>::infinity();
    double diff_max = -diff_min;
    for (std::size_t k = 0; k < count; ++k) {
      const auto v = action_values(t, h, k);
      th[k] = std::max({v[0], v[1], v[2]});
      diff_min = std::min(diff_min, th[k] - h[k]);
      diff_max = std::max(diff_max, th[k] - h[k]);
    }
    span = diff_max - diff_min;
    if (span <= tol) {
      sol.gain = th[ref];
      sol.values = h;
      sol.policy.resize(count);
      for (std::size_t k = 0; k < count; ++k) {
        const auto v = action_values(t, h, k);
        const double best = std::max({v[0], v[1], v[2]});
        sol.policy[k] = v[0] == best   ? MabAction::kFirstOnly
                        : v[1] == best ? MabAction::kSecondOnly
                                       : MabAction::kBoth;
      }
      return sol;
    }
    const double norm = (1.0 - damping) * h[ref] + damping * th[ref];
    for (std::size_t k = 0; k < count; ++k)
      h[k] = (1.0 - damping) * h[k] + damping * th[k] - norm;
  }
  throw NonConvergence(cat("relative value iteration span ", span, " above tol ", tol,
                           " after ", max_iterations, " sweeps"),
                       span);
}

double phi(int n, double x) {
  const double omx = 1.0 - x;
  return 1.0 + omx * omx - (3.0 + x) * std::pow(omx, n + 1);
}

double alpha_root(int n, double tol) {
  double lo = 0.0, hi = 1.0;  // phi_n(0) = -1, phi_n(1) = 1
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (phi(n, mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double tau() { return (3.0 - std::sqrt(5.0)) / 2.0; }

MabSolution closed_form(double p, int n_max, int max_alpha_depth) {
  if (!(p > 0.0 && p <= 1.0)) throw Error(cat("p=", p, " outside (0,1]"));
  if (n_max < 1) throw Error("n_max must be at least 1");
  const MabParams params{p, p};
  MabSolution sol;
  sol.params = params;
  sol.n_max = n_max;
  sol.provenance = MabSolution::Provenance::kClosedForm;
  sol.states = reachable_set(params, n_max);

  const double t = tau();
  const double a1 = alpha_root(1);
  const double Ap = apply_A(params, 1, p, 1);

  double gain, v_star, v_zero, v_inf;
  std::vector<double> v_n(n_max + 1, 0.0);  // v_n[n] for n >= 1
  int threshold_level;                      // A^{level} p separates (1,1) from deferral

  if (p > t) {
    gain = Ap;
    v_star = 2.0 - Ap;
    v_zero = p;
    v_inf = 1.0;
    for (int n = 1; n <= n_max; ++n) v_n[n] = apply_A(params, 1, p, n);
    threshold_level = -1;  // never transmit jointly
  } else if (p > a1) {
    gain = Ap;
    v_star = 2.0 - Ap;
    v_zero = 1.0 - Ap;
    v_inf = 1.0;
    for (int n = 1; n <= n_max; ++n) v_n[n] = apply_A(params, 1, p, n);
    threshold_level = 0;
  } else {
    // Find m with alpha_{m+1} < p <= alpha_m.
    int m = 1;
    while (alpha_root(m + 1) >= p) {
      if (++m > max_alpha_depth)
        throw Error(cat("p=", p, " below the configured alpha depth ", max_alpha_depth));
    }
    const double zeta = 1.0 + p * p + p * p * p;
    gain = p * (1.0 - phi(0, p) / zeta);
    v_star = 2.0 - gain;
    v_zero = 2.0 - p - (1.0 + (1.0 - p) * (1.0 - p)) / zeta;
    v_inf = 1.0;
    for (int n = 1; n <= n_max; ++n) {
      if (n <= m) {
        // Below the threshold depth the fixed point forces
        // v^n = v^0 + (A^n p - p)(J*/p - 1); in particular v^1 = J*.
        const double an1 = apply_A(params, 1, p, n - 1);
        v_n[n] = (1.0 - p) * an1 * (gain / p - 1.0) + v_zero;
      } else {
        v_n[n] = apply_A(params, 1, p, n);
      }
    }
    threshold_level = m;
  }

  auto value_of = [&](const RState& s) -> double {
    switch (s.tag) {
      case RState::Tag::Star: return v_star;
      case RState::Tag::Zero: return v_zero;
      case RState::Tag::N: return v_n[s.n];
      default: return v_inf;
    }
  };
  auto action_of = [&](const RState& s) -> MabAction {
    int l1, l2;
    switch (s.tag) {
      case RState::Tag::Star: l1 = l2 = n_max + 1; break;
      case RState::Tag::Zero: l1 = l2 = 0; break;
      case RState::Tag::N:
        l1 = s.side == 1 ? s.n : 0;
        l2 = s.side == 2 ? s.n : 0;
        break;
      default:
        l1 = s.side == 1 ? n_max + 1 : 0;
        l2 = s.side == 2 ? n_max + 1 : 0;
        break;
    }
    if (threshold_level >= 0 && l1 <= threshold_level && l2 <= threshold_level)
      return MabAction::kBoth;
    if (l1 > l2) return MabAction::kFirstOnly;
    if (l2 > l1) return MabAction::kSecondOnly;
    return MabAction::kFirstOnly;  // ties (q1 = q2) break to (1,0)
  };

  for (const RState& s : sol.states) {
    sol.values.push_back(value_of(s));
    sol.policy.push_back(action_of(s));
  }
  sol.gain = gain;
  return sol;
}

FixedPointReport verify_fixed_point(double p, const MabSolution& sol, int n_max,
                                    double tol) {
  if (sol.params.p1 != sol.params.p2)
    throw Error("verify_fixed_point requires symmetric arrivals");
  const MabParams params{p, p};
  FixedPointReport report;
  const double J = sol.gain;
  const double v_star = sol.value_at(RState::star());
  const double v_zero = sol.value_at(RState::zero());
  const double v_inf = sol.value_at(RState::infty(2));
  auto v_at = [&](int n) {  // v^n with the n > n_max fold
    if (n <= 0) return v_zero;
    if (n > n_max) return v_inf;
    return sol.value_at(RState::elevated(2, n));
  };

  struct Row {
    std::string index;
    double v, a, b, c;
    MabAction chosen;
  };
  std::vector<Row> rows;
  rows.push_back({"*", v_star, 1.0 + v_inf, 1.0 + v_inf, v_star,
                  sol.action_at(RState::star())});
  {
    const double c0 = 2.0 * p * (1.0 - p) + p * p * v_star + (1.0 - p * p) * v_zero;
    rows.push_back({"0", v_zero, p + v_at(1), p + v_at(1), c0,
                    sol.action_at(RState::zero())});
  }
  for (int n = 1; n <= n_max; ++n) {
    const double anp = apply_A(params, 2, p, n);
    const double cn = p + anp - 2.0 * p * anp + p * anp * v_star +
                      (1.0 - p * anp) * v_zero;
    rows.push_back({cat(n), v_at(n), p + v_at(n + 1), anp + v_at(1), cn,
                    sol.action_at(RState::elevated(2, n))});
  }
  {
    const double cinf = 1.0 - p + p * v_star + (1.0 - p) * v_zero;
    rows.push_back({"inf", v_inf, p + v_inf, 1.0 + v_at(1), cinf,
                    sol.action_at(RState::infty(2))});
  }

  for (const Row& r : rows) {
    FixedPointReport::Entry e;
    e.index = r.index;
    e.a = r.a;
    e.b = r.b;
    e.c = r.c;
    const double best = std::max({r.a, r.b, r.c});
    e.residual = std::abs(r.v + J - best);
    const double chosen_value = r.chosen == MabAction::kFirstOnly    ? r.a
                                : r.chosen == MabAction::kSecondOnly ? r.b
                                                                     : r.c;
    e.maximizer_ok = chosen_value >= best - tol;
    report.max_residual = std::max(report.max_residual, e.residual);
    if (!e.maximizer_ok) ++report.maximizer_mismatches;
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace csdp::mab
