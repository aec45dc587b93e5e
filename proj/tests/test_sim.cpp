#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "csdp/coordinator.hpp"
#include "csdp/mab.hpp"
#include "csdp/simulate.hpp"

using namespace csdp;

TEST_CASE("closed-form policy reaches its gain in simulation") {
  const mab::MabParams params{0.5, 0.5};
  const mab::MabSolution sol = mab::closed_form(0.5, 30);
  const SimReport report = simulate_policy(params, sol, 200'000, 7, "closed-form");
  CHECK(std::abs(report.mean - 0.75) <= 3.0 * report.std_error);
  CHECK(report.max_belief_drift <= 1e-9);
  CHECK(report.batches == 100);
}

TEST_CASE("small-p closed-form policy reaches its gain in simulation") {
  const double p = 0.2;
  const mab::MabParams params{p, p};
  const mab::MabSolution sol = mab::closed_form(p, 30);
  const double gain = sol.gain;
  const SimReport report = simulate_policy(params, sol, 200'000, 11, "closed-form");
  CHECK(std::abs(report.mean - gain) <= 3.0 * report.std_error);
  CHECK(report.max_belief_drift <= 1e-9);
}

TEST_CASE("a model that can earn nothing reports exact zeros") {
  const mab::MabParams params{0.0, 0.0};
  const mab::MabSolution sol = mab::mab_relative_vi(params, 2, 1e-10);
  const SimReport report = simulate_policy(params, sol, 50'000, 3, "idle");
  CHECK(report.mean == 0.0);
  CHECK(report.std_error == 0.0);
}

TEST_CASE("visit frequencies are a distribution") {
  const mab::MabParams params{0.35, 0.35};
  const mab::MabSolution sol = mab::closed_form(0.35, 30);
  const SimReport report = simulate_policy(params, sol, 100'000, 5, "closed-form");
  double total = 0.0;
  for (const auto& row : report.visit_frequencies)
    for (double v : row) total += v;
  CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("coordinator policies run online through the filter") {
  const CoupledModel m = mab::mab_model({0.5, 0.5});
  const AverageRewardResult solved = solve_average_reward(m, 1e-8);
  const SimReport report =
      simulate_policy(m, solved.policy, 200'000, 99, /*snap=*/true, "avg");
  CHECK(std::abs(report.mean - 0.75) <= 3.0 * report.std_error);
  CHECK(report.max_belief_drift <= 1e-9);
  double total = 0.0;
  for (const auto& row : report.visit_frequencies)
    for (double v : row) total += v;
  CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("an uncovered belief point fails without snap") {
  const CoupledModel m = mab::mab_model({0.5, 0.5});
  CoordinatorPolicy partial;
  partial.stationary = true;
  partial.layers.resize(1);
  BeliefPoint elsewhere;
  elsewhere.z = 0;
  elsewhere.theta.theta = {{0.9, 0.1}, {0.9, 0.1}};
  Prescription d;
  d.maps = {{0, 1}, {0, 1}};
  partial.set(0, elsewhere, d);
  CHECK_THROWS_AS(simulate_policy(m, partial, 100, 1, /*snap=*/false, "partial"),
                  MissingSuccessor);
  // With snapping the nearest stored prescription applies instead.
  const SimReport report = simulate_policy(m, partial, 100, 1, /*snap=*/true, "partial");
  CHECK(report.steps == 100);
}

TEST_CASE("reports are reproducible for a fixed seed") {
  const mab::MabParams params{0.4, 0.4};
  const mab::MabSolution sol = mab::closed_form(0.4, 30);
  const SimReport a = simulate_policy(params, sol, 50'000, 21, "closed-form");
  const SimReport b = simulate_policy(params, sol, 50'000, 21, "closed-form");
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
  CHECK(a.visit_frequencies == b.visit_frequencies);
}
