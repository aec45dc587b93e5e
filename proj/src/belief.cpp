#include "csdp/belief.hpp"

#include <cmath>

namespace csdp {

BeliefKey belief_key(const BeliefPoint& point, double quantization) {
  BeliefKey key;
  key.z = point.z;
  for (const Dist& d : point.theta.theta)
    for (double v : d) key.q.push_back(quantize(v, quantization));
  return key;
}

double belief_l1(const BeliefPoint& a, const BeliefPoint& b) {
  double dist = 0.0;
  for (std::size_t i = 0; i < a.theta.theta.size(); ++i)
    for (std::size_t x = 0; x < a.theta.theta[i].size(); ++x)
      dist += std::abs(a.theta.theta[i][x] - b.theta.theta[i][x]);
  return dist;
}

BeliefVector update_theta(const CoupledModel& m, const BeliefPoint& point,
                          const Prescription& d, std::span<const int> u_observed,
                          int z_next) {
  if (static_cast<int>(u_observed.size()) != m.n)
    throw IndexError("observed joint action has wrong arity");
  if (z_next < 0 || z_next >= m.z_size)
    throw IndexError(cat("next shared state ", z_next, " out of range"));
  // The shared transition does not depend on the local states, so z_next
  // carries no information about them and drops out of the normalization.
  const int ju = m.u_indexer().index(u_observed);

  BeliefVector next;
  next.theta.resize(m.n);
  for (int i = 0; i < m.n; ++i) {
    const Dist& prior = point.theta.theta[i];
    Dist& post = next.theta[i];
    post.assign(m.x_sizes[i], 0.0);
    double mass = 0.0;
    for (int x = 0; x < m.x_sizes[i]; ++x) {
      if (prior[x] == 0.0) continue;
      if (d.action(i, x) != u_observed[i]) continue;
      mass += prior[x];
      const Dist& row = m.local_row(i, point.z, x, ju);
      for (int xn = 0; xn < m.x_sizes[i]; ++xn) post[xn] += prior[x] * row[xn];
    }
    if (mass == 0.0)
      throw InconsistentObservation(
          cat("observed action u[", i, "]=", u_observed[i],
              " has zero prior probability under the prescription"));
    for (double& v : post) v /= mass;
  }
  return next;
}

JointBelief joint_from_theta(const CoupledModel& m, const BeliefPoint& point) {
  const JointIndexer xx = m.x_indexer();
  JointBelief joint;
  joint.p.assign(m.z_size, std::vector<double>(xx.total(), 0.0));
  std::vector<int> x(m.n, 0);
  int jx = 0;
  do {
    double prod = 1.0;
    for (int i = 0; i < m.n; ++i) prod *= point.theta.theta[i][x[i]];
    joint.p[point.z][jx] = prod;
    ++jx;
  } while (xx.next(x));
  return joint;
}

LocalBelief update_xi(const CoupledModel& m, const LocalBelief& belief, int z,
                      std::span<const int> u_joint, int y_next) {
  const int i = belief.subsystem;
  if (i < 0 || i >= m.n) throw IndexError(cat("subsystem index ", i, " out of range"));
  if (!m.partial()) throw Error("update_xi requires observation kernels");
  if (y_next < 0 || y_next >= m.y_sizes[i])
    throw IndexError(cat("observation ", y_next, " out of range"));
  const int ju = m.u_indexer().index(u_joint);

  Dist predicted(m.x_sizes[i], 0.0);
  for (int x = 0; x < m.x_sizes[i]; ++x) {
    if (belief.xi[x] == 0.0) continue;
    const Dist& row = m.local_row(i, z, x, ju);
    for (int xn = 0; xn < m.x_sizes[i]; ++xn) predicted[xn] += belief.xi[x] * row[xn];
  }
  LocalBelief next;
  next.subsystem = i;
  next.xi.assign(m.x_sizes[i], 0.0);
  double mass = 0.0;
  for (int xn = 0; xn < m.x_sizes[i]; ++xn) {
    next.xi[xn] = predicted[xn] * m.observation_kernels[i][xn][y_next];
    mass += next.xi[xn];
  }
  if (mass == 0.0)
    throw InconsistentObservation(
        cat("observation y=", y_next, " of subsystem ", i, " has zero prior probability"));
  for (double& v : next.xi) v /= mass;
  return next;
}

std::vector<WeightedBeliefPoint> initial_belief_points(const CoupledModel& m) {
  std::vector<WeightedBeliefPoint> points;
  for (int z = 0; z < m.z_size; ++z) {
    if (m.initial_shared[z] <= 0.0) continue;
    BeliefPoint p;
    p.z = z;
    p.theta.theta.resize(m.n);
    for (int i = 0; i < m.n; ++i) p.theta.theta[i] = m.initial_local[i][z];
    points.push_back({std::move(p), m.initial_shared[z]});
  }
  return points;
}

}  // namespace csdp
