#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "csdp/oracle.hpp"
#include "csdp/verify.hpp"

using namespace csdp;
using namespace csdp::oracle;

namespace {

JointDecision stay_silent(int n) {
  return [n](int, const Path&) { return std::vector<int>(n, 0); };
}

GeneralModel deterministic_instance() {
  // Deterministic everything: one shared state, deterministic cycling local
  // dynamics, point-mass initial condition.
  GeneralModel g;
  g.n = 2;
  g.z_size = 1;
  g.x_sizes = {2, 2};
  g.u_sizes = {2, 2};
  g.shared_kernel.assign(1, std::vector<Dist>(4, Dist{1.0}));
  const JointIndexer xx{{2, 2}};
  g.joint_local.assign(1, std::vector<std::vector<Dist>>(4, std::vector<Dist>(4)));
  for (int jx = 0; jx < 4; ++jx)
    for (int ju = 0; ju < 4; ++ju) {
      Dist row(4, 0.0);
      row[(jx + ju) % 4] = 1.0;
      g.joint_local[0][jx][ju] = row;
    }
  g.stage_costs.assign(1, {std::vector<std::vector<double>>(
                              4, std::vector<double>(4, 0.0))});
  for (int jx = 0; jx < 4; ++jx)
    for (int ju = 0; ju < 4; ++ju) g.stage_costs[0][0][jx][ju] = jx == ju ? 1.0 : 0.0;
  g.feasible.assign(2, {});
  for (int i = 0; i < 2; ++i) g.feasible[i] = {{{0, 1}, {0, 1}}};
  g.initial_shared = {1.0};
  g.initial_local_joint = {Dist{0.0, 0.0, 1.0, 0.0}};
  return g;
}

}  // namespace

TEST_CASE("exact joint law of a deterministic system is a single atom") {
  const GeneralModel g = deterministic_instance();
  const ExactJoint joint = exact_joint_distribution(g, stay_silent(2), 3);
  REQUIRE(joint.atoms.size() == 1);
  CHECK(joint.atoms[0].second == doctest::Approx(1.0));
  CHECK(joint.total_mass() == doctest::Approx(1.0));
}

TEST_CASE("exact joint law has unit mass on random instances") {
  for (int seed = 0; seed < 5; ++seed) {
    RandomModelOptions opts;
    opts.z_size = 1 + seed % 2;
    const CoupledModel m = random_model(opts, 40 + seed);
    const GeneralModel g = GeneralModel::from(m);
    const StrategyTable strategy = random_full_history_strategy(g, 3, seed);
    const ExactJoint joint = exact_joint_distribution(g, strategy.decision(g), 3);
    CHECK(std::abs(joint.total_mass() - 1.0) < 1e-12);
  }
}

TEST_CASE("conditional one-step transitions in the joint law match the kernels") {
  const CoupledModel m = random_model({}, 91);
  const GeneralModel g = GeneralModel::from(m);
  const StrategyTable strategy = random_full_history_strategy(g, 3, 91);
  const ExactJoint joint = exact_joint_distribution(g, strategy.decision(g), 3);
  const JointIndexer ux{g.u_sizes};

  // P(x^0_{t+1} = x' | z_t, x^0_t, ju_t) aggregated over everything else.
  std::map<std::tuple<int, int, int>, Dist> seen;
  for (const auto& [p, w] : joint.atoms) {
    for (int t = 0; t + 1 < 3; ++t) {
      auto& row = seen[{p.z[t], p.x[t][0], ux.index(p.u[t])}];
      if (row.empty()) row.assign(2, 0.0);
      row[p.x[t + 1][0]] += w;
    }
  }
  for (auto& [key, row] : seen) {
    const auto& [z, x, ju] = key;
    const double mass = row[0] + row[1];
    const Dist& kernel = m.local_kernels[0][z][x][ju];
    for (int xn = 0; xn < 2; ++xn)
      CHECK(std::abs(row[xn] / mass - kernel[xn]) < 1e-12);
  }
}

TEST_CASE("local-state histories are conditionally independent on coupled instances") {
  for (int seed = 0; seed < 5; ++seed) {
    RandomModelOptions opts;
    opts.z_size = 1 + seed % 2;
    const CoupledModel m = random_model(opts, 60 + seed);
    const GeneralModel g = GeneralModel::from(m);
    const StrategyTable strategy = random_full_history_strategy(g, 3, 60 + seed);
    const double dev = check_conditional_independence(
        exact_joint_distribution(g, strategy.decision(g), 3));
    INFO("seed ", seed);
    CHECK(dev < 1e-12);
  }
}

TEST_CASE("a single subsystem has exactly zero deviation") {
  RandomModelOptions opts;
  opts.n = 1;
  const CoupledModel m = random_model(opts, 3);
  const GeneralModel g = GeneralModel::from(m);
  const StrategyTable strategy = random_full_history_strategy(g, 3, 3);
  CHECK(check_conditional_independence(
            exact_joint_distribution(g, strategy.decision(g), 3)) == 0.0);
}

TEST_CASE("cross-coupled dynamics break both structural properties") {
  const GeneralModel g = counterexample_cross_coupled();
  const double dev = check_conditional_independence(
      exact_joint_distribution(g, stay_silent(2), 3));
  CHECK(dev > 1e-6);
  const double res = check_controlled_markov(g, stay_silent(2), 3);
  CHECK(res > 1e-6);
}

TEST_CASE("controlled-Markov residuals vanish on coupled instances") {
  for (int seed = 0; seed < 5; ++seed) {
    RandomModelOptions opts;
    opts.z_size = 1 + seed % 2;
    const CoupledModel m = random_model(opts, 70 + seed);
    const GeneralModel g = GeneralModel::from(m);
    const StrategyTable strategy = random_full_history_strategy(g, 3, 70 + seed);
    const double res = check_controlled_markov(g, strategy.decision(g), 3);
    INFO("seed ", seed);
    CHECK(res < 1e-12);
  }
  SUBCASE("deterministic instance has zero residual") {
    const GeneralModel g = deterministic_instance();
    CHECK(check_controlled_markov(g, stay_silent(2), 3) == 0.0);
  }
}

TEST_CASE("partial-observation posteriors stay product-form") {
  for (int seed = 0; seed < 3; ++seed) {
    RandomModelOptions opts;
    opts.partial = true;
    opts.z_size = 1 + seed % 2;
    const CoupledModel m = random_model(opts, 80 + seed);
    const GeneralModel g = GeneralModel::from(m);
    const StrategyTable strategy = random_full_history_strategy(g, 2, 80 + seed);
    const JointDecision decision = strategy.decision(g);
    CHECK(check_conditional_independence(exact_joint_distribution(g, decision, 2)) <
          1e-12);
    CHECK(check_xi_independence(g, decision, 2) < 1e-12);
  }
}

TEST_CASE("posterior-state process is controlled Markov on partial instances") {
  for (int seed = 0; seed < 3; ++seed) {
    RandomModelOptions opts;
    opts.partial = true;  // z_size stays 1 to keep the T=3 atom count small
    const CoupledModel m = random_model(opts, 85 + seed);
    const GeneralModel g = GeneralModel::from(m);
    const StrategyTable strategy = random_full_history_strategy(g, 3, 85 + seed);
    const double res = check_controlled_markov_xi(g, strategy.decision(g), 3);
    INFO("seed ", seed);
    CHECK(res < 1e-12);
  }
}

TEST_CASE("zero-horizon search returns zero") {
  const GeneralModel g = GeneralModel::from(random_model({}, 1));
  CHECK(brute_force_optimal(g, 0, InfoPattern::kReduced).value == 0.0);
}

TEST_CASE("search patterns agree with each other at the desk scale") {
  for (int seed = 0; seed < 6; ++seed) {
    RandomModelOptions opts;
    opts.z_size = 1 + seed % 2;
    opts.restrict_feasibility = seed % 3 == 2;
    const CoupledModel m = random_model(opts, 110 + seed);
    const GeneralModel g = GeneralModel::from(m);
    const auto reduced = brute_force_optimal(g, 2, InfoPattern::kReduced);
    const auto markov = brute_force_optimal(g, 2, InfoPattern::kMarkov);
    INFO("seed ", seed);
    CHECK(std::abs(reduced.value - markov.value) < 1e-9);
    // The recorded strategy must reproduce its own value exactly.
    const ExactJoint joint =
        exact_joint_distribution(g, reduced.strategy.decision(g), 2);
    const JointIndexer xx{g.x_sizes};
    const JointIndexer ux{g.u_sizes};
    double replay = 0.0;
    for (const auto& [p, w] : joint.atoms)
      for (int t = 0; t < 2; ++t)
        replay += w * g.cost(t, p.z[t], xx.index(p.x[t]), ux.index(p.u[t]));
    CHECK(std::abs(replay - reduced.value) < 1e-9);
  }
}

TEST_CASE("full-history enumeration agrees with the reduced search at horizon one") {
  for (int seed = 0; seed < 4; ++seed) {
    const CoupledModel m = random_model({}, 130 + seed);
    const GeneralModel g = GeneralModel::from(m);
    const auto full = brute_force_optimal(g, 1, InfoPattern::kFullHistory);
    const auto reduced = brute_force_optimal(g, 1, InfoPattern::kReduced);
    CHECK(std::abs(full.value - reduced.value) < 1e-12);
  }
}

TEST_CASE("full-history enumeration blows up politely") {
  const GeneralModel g = GeneralModel::from(random_model({}, 2));
  CHECK_THROWS_AS(brute_force_optimal(g, 2, InfoPattern::kFullHistory, 1000),
                  CombinatorialBlowup);
}

TEST_CASE("best response over full history matches best response over reduced info") {
  // Fixing one station's full-history strategy, the other's best response
  // needs no more than its current local state and the common data.
  for (int seed = 0; seed < 6; ++seed) {
    RandomModelOptions opts;
    opts.z_size = 1 + seed % 2;
    const CoupledModel m = random_model(opts, 150 + seed);
    const GeneralModel g = GeneralModel::from(m);
    const StrategyTable fixed = random_full_history_strategy(g, 2, 150 + seed);
    const JointDecision fixed_decision = fixed.decision(g);
    for (int station = 0; station < 2; ++station) {
      auto others = [&](int j, int t, const Path& p) { return fixed_decision(t, p)[j]; };
      const auto full =
          best_response(g, station, others, 2, InfoPattern::kFullHistory);
      const auto reduced = best_response(g, station, others, 2, InfoPattern::kReduced);
      INFO("seed ", seed, " station ", station);
      CHECK(std::abs(full.value - reduced.value) < 1e-9);
    }
  }
}

TEST_CASE("person-by-person optimality of the reduced optimum") {
  // Full triple at |Z| = 1: reduced exhaustive, belief-measurable exhaustive,
  // and no full-history best-response improvement.
  for (int seed = 0; seed < 4; ++seed) {
    RandomModelOptions opts;  // z_size = 1
    const CoupledModel m = random_model(opts, 170 + seed);
    const GeneralModel g = GeneralModel::from(m);
    const auto reduced = brute_force_optimal(g, 2, InfoPattern::kReduced);
    const auto markov = brute_force_optimal(g, 2, InfoPattern::kMarkov);
    CHECK(std::abs(reduced.value - markov.value) < 1e-9);
    const JointDecision fixed = reduced.strategy.decision(g);
    for (int station = 0; station < 2; ++station) {
      const auto br = best_response(
          g, station, [&](int j, int t, const Path& p) { return fixed(t, p)[j]; }, 2,
          InfoPattern::kFullHistory);
      INFO("seed ", seed, " station ", station);
      CHECK(std::abs(br.value - reduced.value) < 1e-9);
    }
  }
}

TEST_CASE("independence and markov suites pass on a few seeds") {
  for (const auto& result : {run_suite_independence(3), run_suite_markov(3)}) {
    for (const auto& check : result.checks) {
      INFO(result.suite, ": ", check.name, " stat=", check.stat);
      CHECK(check.passed);
    }
  }
}
