#pragma once

#include "medbal/data.hpp"
#include "medbal/estimators.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace medbal {

enum class EstimatorFamily { eif, ipw, regression_imputation };

std::string to_string(EstimatorFamily f);

/// Per-row influence contributions phi_i - theta_hat for one estimand.
///
/// For the level theta_10 with weights on the normalized scale:
///   phi_i = D n w2 (Y - mu1) + (1-D) n w1 (mu1 - eta10) + eta10
/// and analogously for the other levels (m_d in place of mu/eta for theta_d).
struct InfluenceVector {
  Eigen::VectorXd values;
  Estimand estimand = Estimand::theta_10;
  EstimatorFamily family = EstimatorFamily::eif;
};

InfluenceVector level_influence(const Dataset& data, const WeightPair& weights,
                                const NuisanceFit& nuis, Estimand level, double theta_hat,
                                EstimatorFamily family);

/// V-hat = (1/n) sum_i (phi_i - theta_hat)^2, the per-observation variance;
/// the variance of theta_hat itself is V-hat / n.
double variance_theta(const Dataset& data, const WeightPair& weights, const NuisanceFit& nuis,
                      Estimand level, double theta_hat, EstimatorFamily family);

/// Differenced contributions a - b.
InfluenceVector effect_influence(const InfluenceVector& a, const InfluenceVector& b,
                                 Estimand effect);

/// Variance of the effect estimator: (1/n) sum_i (a_i - b_i)^2 / n.
double variance_effect(const InfluenceVector& a, const InfluenceVector& b);

/// Variance of the estimator (V-hat / n) from one influence vector.
double estimator_variance(const InfluenceVector& phi);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// estimate +- z_{1-(1-level)/2} * se
Interval confidence_interval(double estimate, double se, double level);

/// Two-sided normal p-value for H0: parameter = 0.
double p_value(double estimate, double se);

struct EstimateRow {
  Estimand estimand = Estimand::theta_10;
  double estimate = 0.0;
  std::optional<double> variance;
  std::optional<double> se;
  std::optional<Interval> ci;
  std::optional<double> p;
};

struct EstimateReport {
  EstimatorFamily family = EstimatorFamily::eif;
  std::string method;
  double level = 0.95;
  std::array<EstimateRow, 9> rows;

  const EstimateRow& operator[](Estimand e) const { return rows[static_cast<std::size_t>(e)]; }
  PointEstimates points() const;
};

/// Point estimates plus influence-function inference for the EIF and IPW
/// families; regression imputation reports point estimates only.
EstimateReport build_report(const Dataset& data, const WeightPair& weights,
                            const NuisanceFit& nuis, EstimatorFamily family, double level = 0.95);

}  // namespace medbal
