#include "csdp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "csdp/belief.hpp"
#include "csdp/coordinator.hpp"
#include "csdp/mab.hpp"
#include "csdp/oracle.hpp"
#include "csdp/prescription.hpp"

namespace csdp {

namespace {

using oracle::ExactJoint;
using oracle::GeneralModel;
using oracle::InfoPattern;
using oracle::JointDecision;
using oracle::Path;
using oracle::StrategyTable;

oracle::RandomModelOptions tiny_instance(std::uint64_t seed, bool partial = false) {
  oracle::RandomModelOptions opts;
  opts.n = 2;
  opts.z_size = 1 + static_cast<int>(seed % 2);
  opts.x_size = 2;
  opts.u_size = 2;
  opts.partial = partial;
  opts.y_size = 2;
  return opts;
}

JointDecision trivial_decision(int n) {
  return [n](int, const Path&) { return std::vector<int>(n, 0); };
}

}  // namespace

SuiteResult run_suite_independence(int seeds) {
  SuiteResult result;
  result.suite = "independence";
  for (int seed = 0; seed < seeds; ++seed) {
    const CoupledModel m = oracle::random_model(tiny_instance(seed), seed);
    const GeneralModel gm = GeneralModel::from(m);
    const StrategyTable strategy = oracle::random_full_history_strategy(gm, 3, seed);
    const ExactJoint joint =
        oracle::exact_joint_distribution(gm, strategy.decision(gm), 3);
    const double dev = oracle::check_conditional_independence(joint);
    result.checks.push_back({cat("random instance seed=", seed, " T=3"), dev < 1e-12, dev});
  }
  {
    // Single subsystem: the product of one factor, deviation exactly zero.
    oracle::RandomModelOptions opts = tiny_instance(0);
    opts.n = 1;
    const CoupledModel m = oracle::random_model(opts, 7);
    const GeneralModel gm = GeneralModel::from(m);
    const StrategyTable strategy = oracle::random_full_history_strategy(gm, 3, 7);
    const double dev = oracle::check_conditional_independence(
        oracle::exact_joint_distribution(gm, strategy.decision(gm), 3));
    result.checks.push_back({"single subsystem", dev == 0.0, dev});
  }
  for (int seed = 0; seed < std::max(1, seeds / 4); ++seed) {
    // Partial observation: both the local-state histories and the exact
    // per-station posteriors must stay product-form.
    const CoupledModel m = oracle::random_model(tiny_instance(seed, true), 100 + seed);
    const GeneralModel gm = GeneralModel::from(m);
    const StrategyTable strategy =
        oracle::random_full_history_strategy(gm, 2, 100 + seed);
    const JointDecision decision = strategy.decision(gm);
    const double dev_x = oracle::check_conditional_independence(
        oracle::exact_joint_distribution(gm, decision, 2));
    result.checks.push_back(
        {cat("partial x-histories seed=", seed), dev_x < 1e-12, dev_x});
    const double dev_xi = oracle::check_xi_independence(gm, decision, 2);
    result.checks.push_back(
        {cat("partial xi posteriors seed=", seed), dev_xi < 1e-12, dev_xi});
  }
  {
    const GeneralModel gm = oracle::counterexample_cross_coupled();
    const double dev = oracle::check_conditional_independence(
        oracle::exact_joint_distribution(gm, trivial_decision(2), 3));
    result.checks.push_back({"cross-coupled negative control", dev > 1e-6, dev});
  }
  return result;
}

SuiteResult run_suite_markov(int seeds) {
  SuiteResult result;
  result.suite = "markov";
  for (int seed = 0; seed < seeds; ++seed) {
    const CoupledModel m = oracle::random_model(tiny_instance(seed), 31 + seed);
    const GeneralModel gm = GeneralModel::from(m);
    const StrategyTable strategy =
        oracle::random_full_history_strategy(gm, 3, 31 + seed);
    const double res = oracle::check_controlled_markov(gm, strategy.decision(gm), 3);
    result.checks.push_back({cat("random instance seed=", seed, " T=3"), res < 1e-12, res});
  }
  {
    const GeneralModel gm = oracle::counterexample_cross_coupled();
    const double res = oracle::check_controlled_markov(gm, trivial_decision(2), 3);
    result.checks.push_back({"cross-coupled negative control", res > 1e-6, res});
  }
  return result;
}

SuiteResult run_suite_dp_equivalence(int seeds) {
  SuiteResult result;
  result.suite = "dp-equivalence";
  for (int seed = 0; seed < seeds; ++seed) {
    oracle::RandomModelOptions opts = tiny_instance(seed);
    opts.stages = seed % 3 == 2 ? 2 : 1;  // exercise time-varying costs too
    opts.restrict_feasibility = seed % 4 == 3;
    const CoupledModel m = oracle::random_model(opts, 1000 + seed);
    const GeneralModel gm = GeneralModel::from(m);

    const auto dp = solve_finite_horizon(m, 2);
    const auto reduced = oracle::brute_force_optimal(gm, 2, InfoPattern::kReduced);
    const double gap_dp = std::abs(dp.value - reduced.value);
    result.checks.push_back({cat("dp vs reduced search seed=", seed), gap_dp <= 1e-9, gap_dp});

    const auto markov = oracle::brute_force_optimal(gm, 2, InfoPattern::kMarkov);
    const double gap_markov = std::abs(markov.value - reduced.value);
    result.checks.push_back(
        {cat("belief-measurable vs reduced seed=", seed), gap_markov <= 1e-9, gap_markov});

    // Person-by-person check: no station can improve on the reduced optimum
    // by using its full local history against the others' optimal strategies.
    const JointDecision fixed = reduced.strategy.decision(gm);
    for (int station = 0; station < m.n; ++station) {
      const auto br = oracle::best_response(
          gm, station,
          [&fixed](int j, int t, const Path& p) { return fixed(t, p)[j]; }, 2,
          InfoPattern::kFullHistory);
      const double gap_br = std::abs(br.value - reduced.value);
      result.checks.push_back(
          {cat("full-history best response seed=", seed, " station=", station),
           gap_br <= 1e-9, gap_br});
    }
  }
  return result;
}

SuiteResult run_suite_mab_fixed_point() {
  SuiteResult result;
  result.suite = "mab-fixed-point";
  for (double p : {0.2, 0.36, 0.5}) {
    const mab::MabSolution sol = mab::closed_form(p, 30);
    const mab::FixedPointReport report = mab::verify_fixed_point(p, sol, 30, 1e-9);
    result.checks.push_back(
        {cat("closed-form residuals p=", p), report.max_residual < 1e-9,
         report.max_residual});
    result.checks.push_back({cat("maximizer agreement p=", p),
                             report.maximizer_mismatches == 0,
                             static_cast<double>(report.maximizer_mismatches)});
  }
  for (double p : {0.1, 0.2, 0.3, 0.36, 0.45, 0.5, 0.7, 0.9}) {
    const double closed = mab::closed_form(p, 30).gain;
    const double rvi = mab::mab_relative_vi({p, p}, 30, 1e-9).gain;
    const double gap = std::abs(closed - rvi);
    result.checks.push_back({cat("closed-form vs rvi gain p=", p), gap <= 1e-5, gap});
  }
  return result;
}

namespace {

// A random coordinator strategy: one admissible joint prescription per common
// node (z_{1:t}, u_{1:t-1}), assigned deterministically from the seed.
struct CoordinatorStrategy {
  const CoupledModel& m;
  std::mt19937_64 rng;
  std::map<std::vector<int>, Prescription> nodes;

  CoordinatorStrategy(const CoupledModel& model, std::uint64_t seed)
      : m(model), rng(seed ^ 0xc0c0c0c0c0c0ull) {}

  static std::vector<int> node_key(const Path& p, int t) {
    std::vector<int> key;
    for (int s = 0; s < t; ++s) key.push_back(p.z[s]);
    for (int s = 0; s + 1 < t; ++s)
      for (int v : p.u[s]) key.push_back(v);
    return key;
  }

  const Prescription& at(const Path& p, int t) {
    auto [it, inserted] = nodes.try_emplace(node_key(p, t));
    if (inserted) {
      Prescription d;
      d.maps.resize(m.n);
      const int z = p.z[t - 1];
      for (int i = 0; i < m.n; ++i) {
        d.maps[i].resize(m.x_sizes[i]);
        for (int x = 0; x < m.x_sizes[i]; ++x) {
          const auto& feasible = m.feasible_at(i, z, x);
          d.maps[i][x] = feasible[rng() % feasible.size()];
        }
      }
      it->second = std::move(d);
    }
    return it->second;
  }

  JointDecision decision() {
    return [this](int t, const Path& p) {
      const Prescription& d = at(p, t);
      std::vector<int> u(m.n);
      for (int i = 0; i < m.n; ++i) u[i] = d.action(i, p.x[t - 1][i]);
      return u;
    };
  }
};

double max_abs(double a, double b) { return std::max(a, b); }

// Recursive common-information beliefs against exact conditionals for every
// positive-probability common realization; also the product reconstruction of
// the joint conditional. Returns the worst deviation.
double filter_consistency_deviation(const CoupledModel& m, std::uint64_t seed, int T) {
  const GeneralModel gm = GeneralModel::from(m);
  CoordinatorStrategy strategy(m, seed);
  JointDecision decision = strategy.decision();
  const ExactJoint joint = oracle::exact_joint_distribution(gm, decision, T);
  const JointIndexer xx = m.x_indexer();

  double worst = 0.0;
  for (int t = 1; t <= T; ++t) {
    // Exact conditionals P(x^i_t | C_t) and P(z_t, x_t | C_t) per common node.
    struct Node {
      double mass = 0.0;
      std::vector<Dist> marginal;          // [i] over x^i_t
      std::map<int, double> joint_at_t;    // over jx_t
      const Path* witness = nullptr;
    };
    std::map<std::vector<int>, Node> nodes;
    for (const auto& [p, w] : joint.atoms) {
      Node& node = nodes[CoordinatorStrategy::node_key(p, t)];
      if (node.marginal.empty()) {
        node.marginal.resize(m.n);
        for (int i = 0; i < m.n; ++i) node.marginal[i].assign(m.x_sizes[i], 0.0);
      }
      node.mass += w;
      for (int i = 0; i < m.n; ++i) node.marginal[i][p.x[t - 1][i]] += w;
      node.joint_at_t[xx.index(p.x[t - 1])] += w;
      node.witness = &p;
    }

    for (auto& [key, node] : nodes) {
      // Recursive belief along this realization.
      const Path& path = *node.witness;
      BeliefPoint belief;
      belief.z = path.z[0];
      belief.theta.theta.resize(m.n);
      for (int i = 0; i < m.n; ++i) belief.theta.theta[i] = m.initial_local[i][path.z[0]];
      for (int s = 1; s < t; ++s) {
        const Prescription& d = strategy.at(path, s);
        belief = BeliefPoint{path.z[s],
                             update_theta(m, belief, d, path.u[s - 1], path.z[s])};
      }
      for (int i = 0; i < m.n; ++i)
        for (int x = 0; x < m.x_sizes[i]; ++x)
          worst = max_abs(worst, std::abs(belief.theta.theta[i][x] -
                                          node.marginal[i][x] / node.mass));
      // Product reconstruction of the full conditional (z_t is known given
      // the common information, so only the x-part is in question).
      const JointBelief product = joint_from_theta(m, belief);
      for (int jx = 0; jx < xx.total(); ++jx) {
        auto it = node.joint_at_t.find(jx);
        const double exact = it == node.joint_at_t.end() ? 0.0 : it->second / node.mass;
        worst = max_abs(worst, std::abs(product.p[belief.z][jx] - exact));
      }
    }
  }
  return worst;
}

// Recursive local posteriors against exact conditionals on a partial model.
double xi_consistency_deviation(const CoupledModel& m, std::uint64_t seed, int T) {
  const GeneralModel gm = GeneralModel::from(m);
  const StrategyTable strategy = oracle::random_full_history_strategy(gm, T, seed);
  const ExactJoint joint = oracle::exact_joint_distribution(gm, strategy.decision(gm), T);

  double worst = 0.0;
  for (int i = 0; i < m.n; ++i) {
    for (int t = 1; t <= T; ++t) {
      struct Node {
        double mass = 0.0;
        Dist over_x;
        const Path* witness = nullptr;
      };
      auto info_key = [&](const Path& p) {
        std::vector<int> key;
        for (int s = 0; s < t; ++s) key.push_back(p.y[s][i]);
        for (int s = 0; s < t; ++s) key.push_back(p.z[s]);
        for (int s = 0; s + 1 < t; ++s)
          for (int v : p.u[s]) key.push_back(v);
        return key;
      };
      std::map<std::vector<int>, Node> nodes;
      for (const auto& [p, w] : joint.atoms) {
        Node& node = nodes[info_key(p)];
        if (node.over_x.empty()) node.over_x.assign(m.x_sizes[i], 0.0);
        node.mass += w;
        node.over_x[p.x[t - 1][i]] += w;
        node.witness = &p;
      }
      for (auto& [key, node] : nodes) {
        const Path& path = *node.witness;
        // Recursive posterior: Bayes correction of the initial law, then
        // alternating prediction-correction steps.
        LocalBelief xi;
        xi.subsystem = i;
        xi.xi = m.initial_local[i][path.z[0]];
        {
          double mass = 0.0;
          for (int x = 0; x < m.x_sizes[i]; ++x) {
            xi.xi[x] *= m.observation_kernels[i][x][path.y[0][i]];
            mass += xi.xi[x];
          }
          for (double& v : xi.xi) v /= mass;
        }
        for (int s = 1; s < t; ++s)
          xi = update_xi(m, xi, path.z[s - 1], path.u[s - 1], path.y[s][i]);
        for (int x = 0; x < m.x_sizes[i]; ++x)
          worst = max_abs(worst, std::abs(xi.xi[x] - node.over_x[x] / node.mass));
      }
    }
  }
  return worst;
}

}  // namespace

SuiteResult run_suite_filter(int seeds) {
  SuiteResult result;
  result.suite = "filter";
  for (int seed = 0; seed < seeds; ++seed) {
    oracle::RandomModelOptions opts = tiny_instance(seed);
    opts.restrict_feasibility = seed % 3 == 1;
    const CoupledModel m = oracle::random_model(opts, 500 + seed);
    const double dev = filter_consistency_deviation(m, 500 + seed, 3);
    result.checks.push_back({cat("theta vs exact Bayes seed=", seed), dev < 1e-12, dev});
  }
  for (int seed = 0; seed < seeds; ++seed) {
    const CoupledModel m = oracle::random_model(tiny_instance(seed, true), 900 + seed);
    const double dev = xi_consistency_deviation(m, 900 + seed, 2);
    result.checks.push_back({cat("xi vs exact Bayes seed=", seed), dev < 1e-12, dev});
  }
  {
    // Negative control: with cross-coupled dynamics the time-t conditional is
    // not a product, so no belief vector can reconstruct it.
    const GeneralModel gm = oracle::counterexample_correlated();
    const ExactJoint joint =
        oracle::exact_joint_distribution(gm, trivial_decision(2), 2);
    double dev = 0.0;
    // At t=2 the two components are equal; compare the exact joint law with
    // the product of its marginals.
    std::map<int, double> law;
    std::vector<Dist> marg(2, Dist(2, 0.0));
    double mass = 0.0;
    for (const auto& [p, w] : joint.atoms) {
      law[p.x[1][0] * 2 + p.x[1][1]] += w;
      marg[0][p.x[1][0]] += w;
      marg[1][p.x[1][1]] += w;
      mass += w;
    }
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        auto it = law.find(a * 2 + b);
        const double joint_p = it == law.end() ? 0.0 : it->second / mass;
        dev = std::max(dev, std::abs(joint_p - marg[0][a] / mass * marg[1][b] / mass));
      }
    result.checks.push_back({"correlated negative control", dev > 1e-6, dev});
  }
  return result;
}

SuiteResult run_suite(const std::string& name, int seeds) {
  if (name == "independence") return run_suite_independence(seeds);
  if (name == "markov") return run_suite_markov(seeds);
  if (name == "dp-equivalence") return run_suite_dp_equivalence(seeds);
  if (name == "mab-fixed-point") return run_suite_mab_fixed_point();
  if (name == "filter") return run_suite_filter(seeds);
  throw Error(cat("unknown verify suite '", name, "'"));
}

}  // namespace csdp
