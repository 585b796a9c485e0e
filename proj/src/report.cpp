#include "medbal/report.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>

#include <string>

namespace medbal {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json version_info() {
  json v;
  v["medbal"] = kVersion;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
               "." + std::to_string(EIGEN_MINOR_VERSION);
  v["boost"] = std::to_string(BOOST_VERSION / 100000) + "." +
               std::to_string(BOOST_VERSION / 100 % 1000) + "." + std::to_string(BOOST_VERSION % 100);
#if defined(__clang__)
  v["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  v["compiler"] = std::string("gcc ") + __VERSION__;
#else
  v["compiler"] = "unknown";
#endif
  return v;
}

json to_json(const DualSolution& sol) {
  json j;
  j["status"] = to_string(sol.status);
  j["iterations"] = sol.iterations;
  j["primal_objective"] = finite_or_null(sol.primal_objective);
  j["dual_objective"] = finite_or_null(sol.dual_objective);
  j["duality_gap"] = finite_or_null(sol.duality_gap);
  j["max_violation"] = finite_or_null(sol.max_violation);
  j["first_order_residual"] = finite_or_null(sol.first_order_residual);
  j["dropped_columns"] = json::array();
  for (auto c : sol.dropped_columns) j["dropped_columns"].push_back(c);
  j["warnings"] = sol.warnings;
  return j;
}

json to_json(const WeightSet& ws) {
  json j;
  j["method"] = ws.method;
  j["orientation"] = to_string(ws.orientation);
  if (ws.eps.size() > 0) j["eps"] = std::vector<double>(ws.eps.data(), ws.eps.data() + ws.eps.size());
  if (ws.delta.size() > 0) {
    j["delta"] = std::vector<double>(ws.delta.data(), ws.delta.data() + ws.delta.size());
  }
  if (ws.step1) j["step1"] = to_json(*ws.step1);
  if (ws.step2) j["step2"] = to_json(*ws.step2);
  j["w1_sum"] = ws.w1.sum();
  j["w2_sum"] = ws.w2.sum();
  j["w1_max"] = ws.w1.size() ? ws.w1.maxCoeff() : 0.0;
  j["w2_max"] = ws.w2.size() ? ws.w2.maxCoeff() : 0.0;
  j["warnings"] = ws.warnings;
  return j;
}

json to_json(const EstimateReport& rep) {
  json j;
  j["family"] = to_string(rep.family);
  j["method"] = rep.method;
  j["level"] = rep.level;
  json est = json::object();
  for (const auto& row : rep.rows) {
    json r;
    r["estimate"] = finite_or_null(row.estimate);
    r["variance"] = opt(row.variance);
    r["se"] = opt(row.se);
    r["ci_low"] = row.ci ? json(row.ci->low) : json(nullptr);
    r["ci_high"] = row.ci ? json(row.ci->high) : json(nullptr);
    r["p_value"] = opt(row.p);
    est[to_string(row.estimand)] = r;
  }
  j["estimates"] = est;
  return j;
}

json to_json(const BalanceTable& table) {
  json j;
  j["method"] = table.method;
  j["rows"] = json::array();
  for (const auto& r : table.rows) {
    j["rows"].push_back({{"column", r.column}, {"tasmd_cp", opt(r.tasmd_cp)}, {"tasmd_tc", opt(r.tasmd_tc)}});
  }
  return j;
}

json to_json(const TuningResult& res) {
  auto scores = [](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(finite_or_null(x));
    return a;
  };
  json j;
  j["orientation"] = to_string(res.orientation);
  j["grid_eps"] = res.grid_eps;
  j["grid_delta"] = res.grid_delta;
  j["score_eps"] = scores(res.score_eps);
  j["score_delta"] = scores(res.score_delta);
  j["eps_star"] = res.eps_star;
  j["delta_star"] = res.delta_star;
  j["bootstrap_reps"] = res.bootstrap_reps;
  j["seed"] = res.seed;
  j["notes"] = res.notes;
  return j;
}

json to_json(const MCResult& res) {
  json j;
  j["family"] = to_string(res.family);
  j["setting"] = to_string(res.setting);
  j["n"] = res.n;
  j["reps"] = res.reps;
  j["seed"] = res.seed;
  j["cells"] = json::array();
  for (const auto& c : res.cells) {
    j["cells"].push_back({{"method", to_string(c.method)},
                          {"estimator", to_string(c.family)},
                          {"estimand", to_string(c.estimand)},
                          {"reps", c.reps},
                          {"truth", c.truth},
                          {"mean", c.mean},
                          {"bias", c.bias},
                          {"abs_bias", std::abs(c.bias)},
                          {"variance", c.variance},
                          {"mse", c.mse},
                          {"coverage", opt(c.coverage)}});
  }
  j["failures"] = res.failures;
  json tuned = json::array();
  for (const auto& rep : res.replications) {
    for (const auto& [e, d] : rep.tuned) tuned.push_back({{"rep", rep.rep}, {"eps", e}, {"delta", d}});
  }
  if (!tuned.empty()) j["tuned"] = tuned;
  return j;
}

}  // namespace medbal
