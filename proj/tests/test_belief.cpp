#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "csdp/belief.hpp"
#include "csdp/mab.hpp"
#include "csdp/oracle.hpp"
#include "csdp/verify.hpp"

using namespace csdp;

namespace {

// Exact one-step posterior by joint enumeration: conditions the full product
// prior on the observed actions and pushes through the kernels, without ever
// using the per-subsystem factorization.
std::vector<Dist> exact_theta_update(const CoupledModel& m, const BeliefPoint& point,
                                     const Prescription& d, const std::vector<int>& u,
                                     int z_next) {
  const JointIndexer xx = m.x_indexer();
  const JointIndexer ux = m.u_indexer();
  const int ju = ux.index(u);
  std::vector<double> posterior(xx.total(), 0.0);
  double mass = 0.0;
  std::vector<int> x(m.n, 0);
  do {
    double prior = 1.0;
    for (int i = 0; i < m.n; ++i) prior *= point.theta.theta[i][x[i]];
    if (prior == 0.0) continue;
    bool consistent = true;
    for (int i = 0; i < m.n; ++i) consistent = consistent && d.action(i, x[i]) == u[i];
    if (!consistent) continue;
    const double w = prior * m.shared_row(point.z, ju)[z_next];
    std::vector<int> xn(m.n, 0);
    do {
      double trans = 1.0;
      for (int i = 0; i < m.n; ++i) trans *= m.local_row(i, point.z, x[i], ju)[xn[i]];
      posterior[xx.index(xn)] += w * trans;
    } while (xx.next(xn));
    mass += w;
  } while (xx.next(x));
  REQUIRE(mass > 0.0);
  std::vector<Dist> marginals(m.n);
  for (int i = 0; i < m.n; ++i) marginals[i].assign(m.x_sizes[i], 0.0);
  std::vector<int> xn(m.n, 0);
  int jx = 0;
  do {
    for (int i = 0; i < m.n; ++i) marginals[i][xn[i]] += posterior[jx];
    ++jx;
  } while (xx.next(xn));
  double total = 0.0;
  for (double v : posterior) total += v;
  for (auto& dist : marginals)
    for (double& v : dist) v /= total;
  return marginals;
}

// Exact one-step local posterior by enumeration over the hidden state.
Dist exact_xi_update(const CoupledModel& m, const LocalBelief& belief, int z,
                     const std::vector<int>& u, int y_next) {
  const int i = belief.subsystem;
  const int ju = m.u_indexer().index(u);
  Dist post(m.x_sizes[i], 0.0);
  for (int x = 0; x < m.x_sizes[i]; ++x)
    for (int xn = 0; xn < m.x_sizes[i]; ++xn)
      post[xn] += belief.xi[x] * m.local_row(i, z, x, ju)[xn] *
                  m.observation_kernels[i][xn][y_next];
  double mass = 0.0;
  for (double v : post) mass += v;
  REQUIRE(mass > 0.0);
  for (double& v : post) v /= mass;
  return post;
}

BeliefPoint random_belief(const CoupledModel& m, std::mt19937_64& rng) {
  BeliefPoint p;
  p.z = static_cast<int>(rng() % static_cast<unsigned>(m.z_size));
  p.theta.theta.resize(m.n);
  for (int i = 0; i < m.n; ++i) {
    Dist d(m.x_sizes[i]);
    double sum = 0.0;
    for (double& v : d) {
      v = 0.01 + uniform01(rng);
      sum += v;
    }
    for (double& v : d) v /= sum;
    p.theta.theta[i] = d;
  }
  return p;
}

}  // namespace

TEST_CASE("point-mass belief through a deterministic kernel stays a point mass") {
  CoupledModel m = mab::mab_model({0.3, 0.3});
  BeliefPoint point;
  point.z = 0;
  point.theta.theta = {{0.0, 1.0}, {0.0, 1.0}};
  Prescription d;
  d.maps = {{0, 1}, {0, 1}};  // both transmit when loaded
  const std::vector<int> u = {1, 1};  // collision: both buffers certainly stay full
  const BeliefVector next = update_theta(m, point, d, u, 0);
  CHECK(next.theta[0][1] == 1.0);
  CHECK(next.theta[1][1] == 1.0);
}

TEST_CASE("collision resolution branch of the queue filter") {
  const double p1 = 0.35, p2 = 0.6;
  const CoupledModel m = mab::mab_model({p1, p2});
  BeliefPoint point;
  point.z = 0;
  point.theta.theta = {{1 - 0.7, 0.7}, {1 - 0.4, 0.4}};
  Prescription d;
  d.maps = {{0, 1}, {0, 1}};
  const std::vector<int> u = {1, 0};  // only user 1 transmitted
  const BeliefVector next = update_theta(m, point, d, u, 0);
  CHECK(next.theta[0][1] == doctest::Approx(p1).epsilon(1e-12));
  CHECK(next.theta[1][1] == doctest::Approx(p2).epsilon(1e-12));
}

TEST_CASE("recursive update equals the exact Bayes posterior") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    oracle::RandomModelOptions opts;
    opts.z_size = 1 + trial % 2;
    const CoupledModel m = oracle::random_model(opts, 200 + trial);
    const BeliefPoint point = random_belief(m, rng);
    const auto prescriptions = enumerate_prescriptions(m, point.z);
    const Prescription& d = prescriptions[rng() % prescriptions.size()];
    std::vector<int> u(m.n);
    for (int i = 0; i < m.n; ++i) u[i] = d.action(i, static_cast<int>(rng() % 2));
    const int z_next = static_cast<int>(rng() % static_cast<unsigned>(m.z_size));
    const BeliefVector got = update_theta(m, point, d, u, z_next);
    const std::vector<Dist> expected = exact_theta_update(m, point, d, u, z_next);
    for (int i = 0; i < m.n; ++i)
      for (int x = 0; x < m.x_sizes[i]; ++x)
        CHECK(std::abs(got.theta[i][x] - expected[i][x]) < 1e-12);
  }
}

TEST_CASE("zero-probability observed action is rejected") {
  const CoupledModel m = mab::mab_model({0.3, 0.3});
  BeliefPoint point;
  point.z = 0;
  point.theta.theta = {{1.0, 0.0}, {0.5, 0.5}};  // buffer 1 certainly empty
  Prescription d;
  d.maps = {{0, 1}, {0, 1}};
  const std::vector<int> u = {1, 0};  // user 1 cannot have transmitted
  CHECK_THROWS_AS(update_theta(m, point, d, u, 0), InconsistentObservation);
}

TEST_CASE("joint reconstruction from the product form") {
  SUBCASE("single subsystem places theta at row z") {
    oracle::RandomModelOptions opts;
    opts.n = 1;
    opts.z_size = 2;
    const CoupledModel m = oracle::random_model(opts, 4);
    BeliefPoint point;
    point.z = 1;
    point.theta.theta = {{0.3, 0.7}};
    const JointBelief joint = joint_from_theta(m, point);
    CHECK(joint.p[0][0] == 0.0);
    CHECK(joint.p[1][0] == doctest::Approx(0.3));
    CHECK(joint.p[1][1] == doctest::Approx(0.7));
    CHECK(joint.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("two subsystems multiply out") {
    const CoupledModel m = mab::mab_model({0.3, 0.3});
    BeliefPoint point;
    point.z = 0;
    point.theta.theta = {{0.5, 0.5}, {0.25, 0.75}};
    const JointBelief joint = joint_from_theta(m, point);
    CHECK(joint.p[0][0] == doctest::Approx(0.125));
    CHECK(joint.p[0][1] == doctest::Approx(0.375));
    CHECK(joint.p[0][2] == doctest::Approx(0.125));
    CHECK(joint.p[0][3] == doctest::Approx(0.375));
  }
}

TEST_CASE("local filter: noiseless observations give a point mass") {
  oracle::RandomModelOptions opts;
  opts.partial = true;
  CoupledModel m = oracle::random_model(opts, 9);
  m.observation_kernels[0] = {{1.0, 0.0}, {0.0, 1.0}};  // y = x
  LocalBelief belief;
  belief.subsystem = 0;
  belief.xi = {0.4, 0.6};
  const std::vector<int> u = {1, 0};
  const LocalBelief next = update_xi(m, belief, 0, u, 1);
  CHECK(next.xi[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("local filter: uniform observation kernel reduces to prediction") {
  oracle::RandomModelOptions opts;
  opts.partial = true;
  CoupledModel m = oracle::random_model(opts, 10);
  m.observation_kernels[0] = {{0.5, 0.5}, {0.5, 0.5}};
  LocalBelief belief;
  belief.subsystem = 0;
  belief.xi = {0.4, 0.6};
  const std::vector<int> u = {0, 1};
  const int ju = m.u_indexer().index(u);
  Dist predicted(2, 0.0);
  for (int x = 0; x < 2; ++x)
    for (int xn = 0; xn < 2; ++xn)
      predicted[xn] += belief.xi[x] * m.local_row(0, 0, x, ju)[xn];
  const LocalBelief next = update_xi(m, belief, 0, u, 1);
  CHECK(next.xi[0] == doctest::Approx(predicted[0]).epsilon(1e-12));
  CHECK(next.xi[1] == doctest::Approx(predicted[1]).epsilon(1e-12));
}

TEST_CASE("local filter equals the exact Bayes posterior") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    oracle::RandomModelOptions opts;
    opts.partial = true;
    opts.z_size = 1 + trial % 2;
    const CoupledModel m = oracle::random_model(opts, 300 + trial);
    LocalBelief belief;
    belief.subsystem = static_cast<int>(trial % 2);
    Dist d(2);
    d[0] = 0.05 + 0.9 * uniform01(rng);
    d[1] = 1.0 - d[0];
    belief.xi = d;
    const int z = static_cast<int>(rng() % static_cast<unsigned>(m.z_size));
    const std::vector<int> u = {static_cast<int>(rng() % 2), static_cast<int>(rng() % 2)};
    const int y = static_cast<int>(rng() % 2);
    const LocalBelief got = update_xi(m, belief, z, u, y);
    const Dist expected = exact_xi_update(m, belief, z, u, y);
    for (int x = 0; x < 2; ++x) CHECK(std::abs(got.xi[x] - expected[x]) < 1e-12);
  }
}

TEST_CASE("updated beliefs are normalized") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const CoupledModel m = oracle::random_model({}, 400 + trial);
    const BeliefPoint point = random_belief(m, rng);
    const auto prescriptions = enumerate_prescriptions(m, point.z);
    const Prescription& d = prescriptions[rng() % prescriptions.size()];
    std::vector<int> u(m.n);
    for (int i = 0; i < m.n; ++i) u[i] = d.action(i, static_cast<int>(rng() % 2));
    const BeliefVector next = update_theta(m, point, d, u, 0);
    for (int i = 0; i < m.n; ++i) {
      double sum = 0.0;
      for (double v : next.theta[i]) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-15);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("update is equivariant under subsystem relabeling") {
  std::mt19937_64 rng(77);
  const CoupledModel m = oracle::random_model({}, 55);
  // Swapped model: subsystems 0 and 1 exchanged everywhere, including the
  // joint-action axis of the kernels and costs.
  CoupledModel swapped = m;
  const JointIndexer ux = m.u_indexer();
  auto swap_ju = [&](int ju) {
    auto d = ux.digits(ju);
    std::swap(d[0], d[1]);
    return ux.index(d);
  };
  for (int i = 0; i < 2; ++i) swapped.local_kernels[i] = m.local_kernels[1 - i];
  for (int i = 0; i < 2; ++i) swapped.initial_local[i] = m.initial_local[1 - i];
  for (int i = 0; i < 2; ++i) swapped.feasible[i] = m.feasible[1 - i];
  for (int z = 0; z < m.z_size; ++z)
    for (int x = 0; x < 2; ++x)
      for (int ju = 0; ju < ux.total(); ++ju)
        for (int i = 0; i < 2; ++i)
          swapped.local_kernels[i][z][x][swap_ju(ju)] = m.local_kernels[1 - i][z][x][ju];

  const BeliefPoint point = random_belief(m, rng);
  BeliefPoint mirrored = point;
  std::swap(mirrored.theta.theta[0], mirrored.theta.theta[1]);
  Prescription d;
  d.maps = {{0, 1}, {1, 0}};
  Prescription d_mirrored;
  d_mirrored.maps = {d.maps[1], d.maps[0]};
  const std::vector<int> u = {1, 0};
  const std::vector<int> u_mirrored = {0, 1};

  const BeliefVector a = update_theta(m, point, d, u, 0);
  const BeliefVector b = update_theta(swapped, mirrored, d_mirrored, u_mirrored, 0);
  for (int x = 0; x < 2; ++x) {
    CHECK(a.theta[0][x] == doctest::Approx(b.theta[1][x]).epsilon(1e-12));
    CHECK(a.theta[1][x] == doctest::Approx(b.theta[0][x]).epsilon(1e-12));
  }
}

TEST_CASE("filter suite: recursive beliefs match exhaustive conditionals") {
  const SuiteResult result = run_suite_filter(4);
  for (const auto& check : result.checks) {
    INFO(check.name, " stat=", check.stat);
    CHECK(check.passed);
  }
}
