#pragma once

#include "medbal/data.hpp"
#include "medbal/minimal_weights.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace medbal {

/// Fitted nuisance functions evaluated on every row.
///
/// mu_d  = E[Y | M, D=d, X]   OLS of Y on B within group d
/// eta10 = E[mu_1 | D=0, X]   OLS of mu1-hat on C over controls
/// eta01 = E[mu_0 | D=1, X]   OLS of mu0-hat on C over treated
/// m_d   = E[Y | D=d, X]      OLS of Y on C within group d
struct NuisanceFit {
  Eigen::VectorXd mu1, mu0, eta10, eta01, m1, m0;
  Eigen::VectorXd coef_mu1, coef_mu0, coef_eta10, coef_eta01, coef_m1, coef_m0;
  std::vector<std::string> warnings;
};

NuisanceFit fit_nuisances(const Dataset& data, const DesignMatrix& b_basis,
                          const DesignMatrix& c_basis);

enum class Estimand { theta_10, theta_01, theta_1, theta_0, nde0, nde1, nie0, nie1, ate };

inline constexpr std::array<Estimand, 9> kAllEstimands = {
    Estimand::theta_10, Estimand::theta_01, Estimand::theta_1, Estimand::theta_0, Estimand::nde0,
    Estimand::nde1,     Estimand::nie0,     Estimand::nie1,    Estimand::ate};

std::string to_string(Estimand e);
Estimand parse_estimand(const std::string& name);

/// Effects as (plus, minus) differences of the four mean potential outcomes:
/// NDE(0) = theta_10 - theta_0, NDE(1) = theta_1 - theta_01,
/// NIE(0) = theta_01 - theta_0, NIE(1) = theta_1 - theta_10, ATE = theta_1 - theta_0.
std::pair<Estimand, Estimand> effect_components(Estimand e);
bool is_effect(Estimand e);

struct PointEstimates {
  std::array<double, 9> values{};

  double operator[](Estimand e) const { return values[static_cast<std::size_t>(e)]; }
  double& operator[](Estimand e) { return values[static_cast<std::size_t>(e)]; }

  /// Fills the five effects from the four levels.
  static PointEstimates from_levels(double theta_10, double theta_01, double theta_1,
                                    double theta_0);
};

/// Standard and exchanged weights from one weighting scheme.
///
/// theta_10 uses the standard pair, theta_01 the exchanged pair, theta_0 the
/// standard step-1 weights and theta_1 the exchanged step-1 weights.
struct WeightPair {
  WeightSet standard;
  WeightSet exchanged;
};

/// theta_10 = sum_t w2 (Y - mu1) + sum_c w1 (mu1 - eta10) + mean(eta10), etc.
PointEstimates estimate_eif_type(const Dataset& data, const WeightPair& weights,
                                 const NuisanceFit& nuis);

/// theta_10 = sum_t w2 Y, theta_0 = sum_c w1 Y, etc.
PointEstimates estimate_ipw_type(const Dataset& data, const WeightPair& weights);

/// theta_10 = mean(eta10), theta_1 = mean(m1), etc.
PointEstimates estimate_regression_imputation(const NuisanceFit& nuis);

}  // namespace medbal
