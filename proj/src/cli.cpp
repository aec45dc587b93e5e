#include "csdp/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "csdp/coordinator.hpp"
#include "csdp/model_io.hpp"
#include "csdp/simulate.hpp"
#include "csdp/verify.hpp"

namespace csdp {

using nlohmann::json;

namespace {

void emit(const json& j, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << j.dump(2) << "\n";
  } else {
    std::ofstream f(out_path);
    if (!f) throw Error(cat("cannot write ", out_path));
    f << j.dump(2) << "\n";
  }
}

std::string format_root(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12f", v);
  return buf;
}

json sim_report_to_json(const SimReport& r) {
  json j;
  j["policy"] = r.policy_id;
  j["steps"] = r.steps;
  j["seed"] = r.seed;
  j["mean"] = r.mean;
  j["std_error"] = r.std_error;
  j["ci"] = {r.ci_low, r.ci_high};
  j["batches"] = r.batches;
  j["visit_frequencies"] = r.visit_frequencies;
  j["max_belief_drift"] = r.max_belief_drift;
  return j;
}

struct SolveArgs {
  std::string model_path, out_path;
  int horizon = -1;
  double discount = -1.0;
  bool average = false;
  double tol = 1e-9;
  std::size_t max_points = 100'000;
  double quantization = 1e-9;
  bool snap = false;
};

int cmd_solve(const SolveArgs& a, std::ostream& out) {
  const CoupledModel model = load_model(a.model_path);
  json j;
  if (a.horizon >= 0) {
    const FiniteHorizonResult res = solve_finite_horizon(model, a.horizon);
    j["kind"] = "finite-horizon";
    j["horizon"] = a.horizon;
    j["value_at_initial"] = res.value;
    j["policy"] = policy_to_json(res.policy);
    j["first_stage_values"] = value_function_to_json(res.first_stage_values);
  } else {
    BeliefSetSpec spec;
    spec.reach.max_points = a.max_points;
    spec.reach.quantization = a.quantization;
    spec.snap = a.snap;
    if (a.average) {
      const AverageRewardResult res = solve_average_reward(model, a.tol, spec);
      j["kind"] = "average";
      j["tol"] = a.tol;
      j["gain"] = res.gain;
      j["iterations"] = res.iterations;
      j["policy"] = policy_to_json(res.policy);
      j["relative_values"] = value_function_to_json(res.relative_value);
    } else {
      const DiscountedResult res = solve_discounted(model, a.discount, a.tol, spec);
      j["kind"] = "discounted";
      j["discount"] = a.discount;
      j["tol"] = a.tol;
      j["iterations"] = res.iterations;
      j["policy"] = policy_to_json(res.policy);
      j["values"] = value_function_to_json(res.value);
    }
  }
  emit(j, a.out_path, out);
  return 0;
}

struct MabArgs {
  double p = 0.0, p2 = -1.0;
  std::string mode = "both", out_path, emit_model;
  int nmax = 0;
  double tol = 1e-9;
};

int cmd_mab(const MabArgs& a, std::ostream& out) {
  mab::MabParams params{a.p, a.p2 < 0.0 ? a.p : a.p2};
  if (!a.emit_model.empty()) {
    save_model(mab::mab_model(params), a.emit_model);
    out << "wrote model to " << a.emit_model << "\n";
    return 0;
  }
  const int nmax =
      a.nmax > 0 ? a.nmax : (std::min(params.p1, params.p2) < 0.15 ? 60 : 30);
  json j;
  j["p"] = params.p1;
  j["p2"] = params.p2;
  j["n_max"] = nmax;
  j["mode"] = a.mode;

  const bool wants_closed = a.mode == "closed-form" || a.mode == "both";
  const bool wants_rvi = a.mode == "rvi" || a.mode == "both";
  if (!wants_closed && !wants_rvi)
    throw Error(cat("unknown mode '", a.mode, "' (closed-form|rvi|both)"));

  if (wants_closed) {
    if (!params.symmetric())
      throw Error("closed-form requires symmetric arrivals (omit --p2 or set it equal)");
    const mab::MabSolution sol = mab::closed_form(params.p1, nmax);
    j["closed_form"] = mab_solution_to_json(sol);
    const mab::FixedPointReport rep = mab::verify_fixed_point(params.p1, sol, nmax, 1e-9);
    json residuals = json::object();
    for (const auto& e : rep.entries) residuals[e.index] = e.residual;
    j["closed_form"]["residuals"] = std::move(residuals);
    j["gain"] = sol.gain;
  }
  if (wants_rvi) {
    const mab::MabSolution sol = mab::mab_relative_vi(params, nmax, a.tol);
    j["rvi"] = mab_solution_to_json(sol);
    j["gain"] = sol.gain;
  }
  if (wants_closed && wants_rvi) {
    const double discrepancy =
        std::abs(j["closed_form"]["gain"].get<double>() - j["rvi"]["gain"].get<double>());
    j["gain_discrepancy"] = discrepancy;
    out << "gain discrepancy: " << discrepancy << "\n";
  }
  emit(j, a.out_path, out);
  return 0;
}

struct SimArgs {
  std::string model_path, policy = "closed-form", out_path;
  double mab_p = -1.0, mab_p2 = -1.0;
  std::uint64_t steps = 1'000'000;
  std::uint64_t seed = 1;
  int nmax = 0;
  bool snap = false;
};

int cmd_simulate(const SimArgs& a, std::ostream& out) {
  SimReport report;
  if (!a.model_path.empty()) {
    const CoupledModel model = load_model(a.model_path);
    std::ifstream f(a.policy);
    if (!f) throw ModelFormatError(cat("cannot open policy file ", a.policy));
    json pj;
    try {
      pj = json::parse(f);
    } catch (const json::parse_error& e) {
      throw ModelFormatError(cat("parse error in ", a.policy, ": ", e.what()));
    }
    if (pj.contains("policy")) pj = pj.at("policy");  // accept solve output files
    const CoordinatorPolicy policy = policy_from_json(pj);
    report = simulate_policy(model, policy, a.steps, a.seed, a.snap, a.policy);
  } else if (a.mab_p >= 0.0) {
    mab::MabParams params{a.mab_p, a.mab_p2 < 0.0 ? a.mab_p : a.mab_p2};
    const int nmax =
        a.nmax > 0 ? a.nmax : (std::min(params.p1, params.p2) < 0.15 ? 60 : 30);
    mab::MabSolution sol;
    if (a.policy == "closed-form") {
      if (!params.symmetric()) throw Error("closed-form requires symmetric arrivals");
      sol = mab::closed_form(params.p1, nmax);
    } else {
      std::ifstream f(a.policy);
      if (!f) throw ModelFormatError(cat("cannot open policy file ", a.policy));
      json pj;
      try {
        pj = json::parse(f);
      } catch (const json::parse_error& e) {
        throw ModelFormatError(cat("parse error in ", a.policy, ": ", e.what()));
      }
      if (pj.contains("closed_form")) pj = pj.at("closed_form");
      sol = mab_solution_from_json(pj);
    }
    report = simulate_policy(params, sol, a.steps, a.seed, a.policy);
  } else {
    throw Error("give either --model FILE or --mab-p P");
  }
  emit(sim_report_to_json(report), a.out_path, out);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coordinator dynamic programming for coupled subsystems with control sharing"};
  app.require_subcommand(1);

  SolveArgs solve_args;
  CLI::App* solve = app.add_subcommand("solve", "solve a model file");
  solve->add_option("--model", solve_args.model_path, "model JSON file")->required();
  auto* horizon_opt = solve->add_option("--horizon", solve_args.horizon, "finite horizon T");
  auto* discount_opt =
      solve->add_option("--discount", solve_args.discount, "discount factor in (0,1)");
  auto* average_opt = solve->add_flag("--average", solve_args.average, "average reward");
  solve->add_option("--tol", solve_args.tol, "stopping tolerance");
  solve->add_option("--out", solve_args.out_path, "write the report here");
  solve->add_option("--max-points", solve_args.max_points, "belief set cap");
  solve->add_option("--quantization", solve_args.quantization, "belief hashing grid");
  solve->add_flag("--snap", solve_args.snap, "snap out-of-set successors");
  horizon_opt->excludes(discount_opt)->excludes(average_opt);
  discount_opt->excludes(average_opt);

  MabArgs mab_args;
  CLI::App* mab_cmd = app.add_subcommand("mab", "multiaccess broadcast solutions");
  mab_cmd->add_option("--p", mab_args.p, "arrival probability")->required();
  mab_cmd->add_option("--p2", mab_args.p2, "second user's arrival probability");
  mab_cmd->add_option("--mode", mab_args.mode, "closed-form | rvi | both");
  mab_cmd->add_option("--nmax", mab_args.nmax, "reachable-set truncation depth");
  mab_cmd->add_option("--tol", mab_args.tol, "RVI span tolerance");
  mab_cmd->add_option("--out", mab_args.out_path, "write the report here");
  mab_cmd->add_option("--emit-model", mab_args.emit_model,
                      "write the model file instead of solving");

  std::string suite;
  int seeds = 20;
  CLI::App* verify_cmd = app.add_subcommand("verify", "run a verification suite");
  verify_cmd
      ->add_option("--suite", suite,
                   "independence | markov | dp-equivalence | mab-fixed-point | filter")
      ->required();
  verify_cmd->add_option("--seeds", seeds, "random instances per suite");

  SimArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Monte Carlo policy evaluation");
  sim_cmd->add_option("--model", sim_args.model_path, "model JSON file");
  sim_cmd->add_option("--mab-p", sim_args.mab_p, "multiaccess arrival probability");
  sim_cmd->add_option("--mab-p2", sim_args.mab_p2, "second user's arrival probability");
  sim_cmd->add_option("--policy", sim_args.policy, "policy file or 'closed-form'");
  sim_cmd->add_option("--steps", sim_args.steps, "trajectory length");
  sim_cmd->add_option("--seed", sim_args.seed, "random seed");
  sim_cmd->add_option("--nmax", sim_args.nmax, "reachable-set truncation depth");
  sim_cmd->add_flag("--snap", sim_args.snap, "snap unknown belief points");
  sim_cmd->add_option("--out", sim_args.out_path, "write the report here");

  int alpha_n = -1;
  bool want_tau = false;
  CLI::App* roots_cmd = app.add_subcommand("roots", "threshold roots");
  auto* alpha_opt = roots_cmd->add_option("--alpha", alpha_n, "root of phi_n on [0,1]");
  auto* tau_opt = roots_cmd->add_flag("--tau", want_tau, "root of x = (1-x)^2");
  alpha_opt->excludes(tau_opt);

  std::vector<const char*> argv;
  argv.push_back("csdp");
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 64;
  }

  try {
    if (solve->parsed()) {
      if (!*horizon_opt && !*discount_opt && !*average_opt)
        throw Error("give one of --horizon, --discount, --average");
      return cmd_solve(solve_args, out);
    }
    if (mab_cmd->parsed()) return cmd_mab(mab_args, out);
    if (verify_cmd->parsed()) {
      const SuiteResult result = run_suite(suite, seeds);
      for (const auto& c : result.checks)
        out << (c.passed ? "[ok]   " : "[FAIL] ") << result.suite << ": " << c.name
            << " (stat=" << c.stat << ")\n";
      out << (result.passed() ? "PASS" : "FAIL") << " suite " << result.suite << "\n";
      return result.passed() ? 0 : 1;
    }
    if (sim_cmd->parsed()) return cmd_simulate(sim_args, out);
    if (roots_cmd->parsed()) {
      if (alpha_n >= 0)
        out << format_root(mab::alpha_root(alpha_n)) << "\n";
      else if (want_tau)
        out << format_root(mab::tau()) << "\n";
      else
        throw Error("give --alpha N or --tau");
      return 0;
    }
  } catch (const ModelFormatError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const CombinatorialBlowup& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NonConvergence& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace csdp
