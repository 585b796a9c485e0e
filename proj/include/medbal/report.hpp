#pragma once

#include "medbal/diagnostics.hpp"
#include "medbal/dual_solver.hpp"
#include "medbal/inference.hpp"
#include "medbal/minimal_weights.hpp"
#include "medbal/simulation.hpp"
#include "medbal/tuning.hpp"

#include <json.hpp>

namespace medbal {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

/// Library, Eigen, Boost and compiler versions.
nlohmann::json version_info();

nlohmann::json to_json(const DualSolution& sol);
nlohmann::json to_json(const WeightSet& ws);  // certificates and summary, not the weights
nlohmann::json to_json(const EstimateReport& rep);
nlohmann::json to_json(const BalanceTable& table);
nlohmann::json to_json(const TuningResult& res);
/// Wall time is left out so identical runs serialize identically.
nlohmann::json to_json(const MCResult& res);

}  // namespace medbal
