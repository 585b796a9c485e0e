#pragma once

#include "medbal/data.hpp"
#include "medbal/estimators.hpp"
#include "medbal/inference.hpp"
#include "medbal/penalty.hpp"
#include "medbal/tuning.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace medbal {

enum class SimFamily { ts2012, wc2018 };
enum class SimSetting { A, B, C };

std::string to_string(SimFamily f);
std::string to_string(SimSetting s);
SimFamily parse_family(const std::string& s);  // "ts" / "ts2012" / "wc" / "wc2018"
SimSetting parse_setting(const std::string& s);

struct DGP {
  SimFamily family = SimFamily::ts2012;
  Eigen::Index n = 500;

  /// NDE(0) = NDE(1) = 1 for ts2012 and 0 for wc2018.
  double true_nde() const { return family == SimFamily::ts2012 ? 1.0 : 0.0; }
};

struct SimDraw {
  Dataset data;  // mediator "M"; covariates Z1..Z4 (ts) or Z1..Z10 (wc) then X1..X4 / X1..X10
  Eigen::VectorXd pi1_true;
  Eigen::VectorXd xi1_true;
};

/// One dataset from the family's equations. Each variable block (Z, D, M, noise)
/// draws from its own substream keyed by (seed, rep, block).
SimDraw draw(const DGP& dgp, std::uint64_t seed, std::uint64_t rep);

/// True P(D=1 | Z) and P(D=1 | M, Z) from the generating logits.
double true_pi1(SimFamily f, const double* z);
double true_xi1(SimFamily f, const double* z, double m);

/// Regressor sets for one simulation setting.
///
/// c_spec / b_spec: step-1 / step-2 balancing bases, also the pi / xi logit
/// designs and the regression-imputation regressors.
/// outcome_c_spec / outcome_b_spec: regressors for eta, m / mu in the EIF-type estimators.
struct SettingConfig {
  SimSetting id = SimSetting::A;
  BasisSpec c_spec;
  BasisSpec b_spec;
  BasisSpec outcome_c_spec;
  BasisSpec outcome_b_spec;

  static SettingConfig make(SimFamily family, SimSetting setting);
};

enum class SimMethod { mw, mw_tuned, eif, eif_trim, cbps, true_ps, ri };

std::string to_string(SimMethod m);
SimMethod parse_method(const std::string& s);

struct MCOptions {
  int reps = 200;
  std::uint64_t seed = 1;
  int workers = 1;
  std::vector<SimMethod> methods = {SimMethod::mw};
  Penalty penalty = Penalty::entropy();
  double eps = 0.0;
  double delta = 0.0;
  double level = 0.95;
  TuningOptions tuning;  // used by mw-tuned; its seed is re-derived per replication
  SolverConfig solver;
};

/// Monte Carlo summary for one (method, estimator family, estimand).
///
/// variance uses the R - 1 divisor and mse is the mean squared error, so
/// mse = bias^2 + variance (R - 1) / R.
struct MCCell {
  SimMethod method = SimMethod::mw;
  EstimatorFamily family = EstimatorFamily::eif;
  Estimand estimand = Estimand::nde1;
  int reps = 0;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double mse = 0.0;
  std::optional<double> coverage;
};

struct ReplicationEstimate {
  SimMethod method = SimMethod::mw;
  EstimatorFamily family = EstimatorFamily::eif;
  Estimand estimand = Estimand::nde1;
  double estimate = 0.0;
  std::optional<double> se;
};

struct ReplicationOutcome {
  std::uint64_t rep = 0;
  std::vector<ReplicationEstimate> estimates;
  std::vector<std::string> failures;  // "<method>: <message>"
  std::vector<std::pair<double, double>> tuned;  // (eps*, delta*) per orientation for mw-tuned
};

struct MCResult {
  SimFamily family = SimFamily::ts2012;
  SimSetting setting = SimSetting::A;
  Eigen::Index n = 0;
  int reps = 0;
  std::uint64_t seed = 0;
  std::vector<MCCell> cells;
  std::vector<std::string> failures;
  std::vector<ReplicationOutcome> replications;
  double wall_seconds = 0.0;

  const MCCell* find(SimMethod m, EstimatorFamily f, Estimand e) const;
};

/// Builds bases for a drawn dataset according to the setting.
struct SimBases {
  DesignMatrix c, b, outcome_c, outcome_b;
};
SimBases build_sim_bases(const SettingConfig& cfg, const Dataset& data);

ReplicationOutcome run_replication(const DGP& dgp, const SettingConfig& setting,
                                   const MCOptions& opts, std::uint64_t rep);

/// Replications run on a worker pool; results are aggregated in replication
/// order so they do not depend on the worker count.
MCResult run_mc(const DGP& dgp, const SettingConfig& setting, const MCOptions& opts);

/// Flat table: method,family,estimand,reps,truth,mean,abs_bias,variance,mse,coverage.
void write_mc_table(const MCResult& res, const std::string& path);

}  // namespace medbal
