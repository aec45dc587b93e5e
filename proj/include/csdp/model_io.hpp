#pragma once

#include <filesystem>
#include <json.hpp>

#include "csdp/coordinator.hpp"
#include "csdp/mab.hpp"
#include "csdp/model.hpp"

namespace csdp {

// Model file schema: alphabet sizes plus nested probability arrays. Kernels
// are row-major in (z, x, u_joint); joint indices put subsystem 0 in the most
// significant position. The validator runs on load; violations raise
// ModelFormatError listing every offending field.
nlohmann::json model_to_json(const CoupledModel& model);
CoupledModel model_from_json(const nlohmann::json& j);
CoupledModel load_model(const std::filesystem::path& path);
void save_model(const CoupledModel& model, const std::filesystem::path& path);

nlohmann::json prescription_to_json(const Prescription& d);
Prescription prescription_from_json(const nlohmann::json& j);

nlohmann::json belief_point_to_json(const BeliefPoint& p);
BeliefPoint belief_point_from_json(const nlohmann::json& j);

// Policies and value tables serialize as arrays of belief-point entries in a
// deterministic (insertion) order.
nlohmann::json policy_to_json(const CoordinatorPolicy& policy);
CoordinatorPolicy policy_from_json(const nlohmann::json& j);
nlohmann::json value_function_to_json(const ValueFunction& vf);

nlohmann::json mab_solution_to_json(const mab::MabSolution& sol);
mab::MabSolution mab_solution_from_json(const nlohmann::json& j);

}  // namespace csdp
