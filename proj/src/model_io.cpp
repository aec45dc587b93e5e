#include "csdp/model_io.hpp"

#include <fstream>

namespace csdp {

using nlohmann::json;

namespace {

Dist dist_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ModelFormatError(cat(where, ": expected an array"));
  Dist d;
  for (const auto& v : j) {
    if (!v.is_number()) throw ModelFormatError(cat(where, ": expected numbers"));
    d.push_back(v.get<double>());
  }
  return d;
}

template <class T>
T require(const json& j, const std::string& field) {
  if (!j.contains(field)) throw ModelFormatError(cat("missing field '", field, "'"));
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    throw ModelFormatError(cat("field '", field, "': ", e.what()));
  }
}

}  // namespace

json model_to_json(const CoupledModel& m) {
  json j;
  j["n"] = m.n;
  j["shared_alphabet"] = m.z_size;
  j["local_alphabets"] = m.x_sizes;
  j["action_alphabets"] = m.u_sizes;
  if (!m.y_sizes.empty()) j["observation_alphabets"] = m.y_sizes;
  j["shared_kernel"] = m.shared_kernel;
  j["local_kernels"] = m.local_kernels;
  if (!m.observation_kernels.empty()) j["observation_kernels"] = m.observation_kernels;
  if (m.time_varying_cost())
    j["stage_costs"] = m.stage_costs;
  else
    j["stage_cost"] = m.stage_costs.front();
  j["objective_sense"] = to_string(m.sense);
  j["feasible_actions"] = m.feasible;
  j["initial_shared"] = m.initial_shared;
  j["initial_local"] = m.initial_local;
  return j;
}

CoupledModel model_from_json(const json& j) {
  CoupledModel m;
  m.n = require<int>(j, "n");
  m.z_size = require<int>(j, "shared_alphabet");
  m.x_sizes = require<std::vector<int>>(j, "local_alphabets");
  m.u_sizes = require<std::vector<int>>(j, "action_alphabets");
  if (j.contains("observation_alphabets"))
    m.y_sizes = require<std::vector<int>>(j, "observation_alphabets");

  try {
    m.shared_kernel = j.at("shared_kernel").get<std::vector<std::vector<Dist>>>();
    m.local_kernels =
        j.at("local_kernels")
            .get<std::vector<std::vector<std::vector<std::vector<Dist>>>>>();
    if (j.contains("observation_kernels"))
      m.observation_kernels =
          j.at("observation_kernels").get<std::vector<std::vector<Dist>>>();
    if (j.contains("stage_costs")) {
      if (j.contains("stage_cost"))
        throw ModelFormatError("give either 'stage_cost' or 'stage_costs', not both");
      m.stage_costs =
          j.at("stage_costs")
              .get<std::vector<std::vector<std::vector<std::vector<double>>>>>();
    } else if (j.contains("stage_cost")) {
      m.stage_costs.push_back(
          j.at("stage_cost").get<std::vector<std::vector<std::vector<double>>>>());
    } else {
      throw ModelFormatError("missing field 'stage_cost'");
    }
    if (j.contains("feasible_actions"))
      m.feasible = j.at("feasible_actions")
                       .get<std::vector<std::vector<std::vector<std::vector<int>>>>>();
    m.initial_shared = dist_from_json(j.at("initial_shared"), "initial_shared");
    m.initial_local = require<std::vector<std::vector<Dist>>>(j, "initial_local");
  } catch (const json::exception& e) {
    throw ModelFormatError(cat("malformed model: ", e.what()));
  }

  const std::string sense = require<std::string>(j, "objective_sense");
  if (sense == "minimize")
    m.sense = Sense::minimize;
  else if (sense == "maximize")
    m.sense = Sense::maximize;
  else
    throw ModelFormatError(cat("objective_sense '", sense, "' must be minimize or maximize"));

  if (m.feasible.empty() && m.n > 0 && !m.x_sizes.empty() && !m.u_sizes.empty())
    m.allow_all_actions();

  ValidationReport report = validate_model(m);
  if (!report.ok()) {
    std::string what = "model fails validation:";
    for (const auto& v : report.violations) what += cat("\n  - ", v);
    throw ModelFormatError(what);
  }
  return m;
}

CoupledModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelFormatError(cat("cannot open model file ", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ModelFormatError(cat("parse error in ", path.string(), ": ", e.what()));
  }
  return model_from_json(j);
}

void save_model(const CoupledModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(cat("cannot write model file ", path.string()));
  out << model_to_json(m).dump(2) << "\n";
}

json prescription_to_json(const Prescription& d) { return json(d.maps); }

Prescription prescription_from_json(const json& j) {
  Prescription d;
  d.maps = j.get<std::vector<std::vector<int>>>();
  return d;
}

json belief_point_to_json(const BeliefPoint& p) {
  json j;
  j["z"] = p.z;
  j["theta"] = p.theta.theta;
  return j;
}

BeliefPoint belief_point_from_json(const json& j) {
  BeliefPoint p;
  p.z = require<int>(j, "z");
  p.theta.theta = j.at("theta").get<std::vector<Dist>>();
  return p;
}

json policy_to_json(const CoordinatorPolicy& policy) {
  json j;
  j["quantization"] = policy.quantization;
  j["stationary"] = policy.stationary;
  json layers = json::array();
  for (const auto& layer : policy.layers) {
    json entries = json::array();
    for (const BeliefPoint& p : layer.points) {
      json e = belief_point_to_json(p);
      e["prescription"] =
          prescription_to_json(layer.table.at(belief_key(p, policy.quantization)));
      entries.push_back(std::move(e));
    }
    layers.push_back(std::move(entries));
  }
  j["layers"] = std::move(layers);
  return j;
}

CoordinatorPolicy policy_from_json(const json& j) {
  CoordinatorPolicy policy;
  policy.quantization = require<double>(j, "quantization");
  policy.stationary = require<bool>(j, "stationary");
  int stage = 0;
  for (const auto& layer : j.at("layers")) {
    for (const auto& e : layer)
      policy.set(stage, belief_point_from_json(e),
                 prescription_from_json(e.at("prescription")));
    if (policy.layers.size() <= static_cast<std::size_t>(stage))
      policy.layers.resize(stage + 1);  // keep empty layers addressable
    ++stage;
  }
  return policy;
}

json value_function_to_json(const ValueFunction& vf) {
  json j;
  j["sense"] = to_string(vf.sense);
  j["quantization"] = vf.quantization;
  json entries = json::array();
  for (const BeliefPoint& p : vf.points) {
    json e = belief_point_to_json(p);
    e["value"] = vf.table.at(belief_key(p, vf.quantization));
    entries.push_back(std::move(e));
  }
  j["entries"] = std::move(entries);
  return j;
}

json mab_solution_to_json(const mab::MabSolution& sol) {
  json j;
  j["p"] = sol.params.p1;
  j["p2"] = sol.params.p2;
  j["n_max"] = sol.n_max;
  j["gain"] = sol.gain;
  j["provenance"] =
      sol.provenance == mab::MabSolution::Provenance::kClosedForm ? "closed-form" : "rvi";
  json states = json::array();
  for (std::size_t k = 0; k < sol.states.size(); ++k) {
    const mab::RState& s = sol.states[k];
    json e;
    e["state"] = mab::to_string(s);
    const mab::QPair q = mab::to_qpair(sol.params, s);
    e["q"] = {q.q1, q.q2};
    e["value"] = sol.values[k];
    const auto [s1, s2] = mab::to_pair(sol.policy[k]);
    e["action"] = {s1, s2};
    states.push_back(std::move(e));
  }
  j["states"] = std::move(states);
  return j;
}

namespace {

mab::RState rstate_from_string(const std::string& s) {
  if (s == "star") return mab::RState::star();
  if (s == "zero") return mab::RState::zero();
  if (s.rfind("infty(", 0) == 0) return mab::RState::infty(s[6] - '0');
  if (s.rfind("n(", 0) == 0) {
    const int side = s[2] - '0';
    const int n = std::stoi(s.substr(4, s.size() - 5));
    return mab::RState::elevated(side, n);
  }
  throw ModelFormatError(cat("unknown reachable-set state '", s, "'"));
}

}  // namespace

mab::MabSolution mab_solution_from_json(const json& j) {
  mab::MabSolution sol;
  sol.params.p1 = require<double>(j, "p");
  sol.params.p2 = require<double>(j, "p2");
  sol.n_max = require<int>(j, "n_max");
  sol.gain = require<double>(j, "gain");
  sol.provenance = require<std::string>(j, "provenance") == "closed-form"
                       ? mab::MabSolution::Provenance::kClosedForm
                       : mab::MabSolution::Provenance::kRvi;
  for (const auto& e : j.at("states")) {
    sol.states.push_back(rstate_from_string(e.at("state").get<std::string>()));
    sol.values.push_back(e.at("value").get<double>());
    const auto action = e.at("action").get<std::vector<int>>();
    if (action == std::vector<int>{1, 0})
      sol.policy.push_back(mab::MabAction::kFirstOnly);
    else if (action == std::vector<int>{0, 1})
      sol.policy.push_back(mab::MabAction::kSecondOnly);
    else
      sol.policy.push_back(mab::MabAction::kBoth);
  }
  return sol;
}

}  // namespace csdp
