#pragma once

#include "medbal/data.hpp"
#include "medbal/logistic.hpp"
#include "medbal/minimal_weights.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace medbal {

struct TrimInterval {
  double lower = 0.01;
  double upper = 0.99;
};

/// Inverse-propensity weights from P(D=1|X) and P(D=1|M,X), normalized within group.
///
/// standard:  w1 = 1/pi0 on controls, w2 = xi0/(pi0 xi1) on treated
/// exchanged: w1 = 1/pi1 on treated,  w2 = xi1/(pi1 xi0) on controls
///
/// With `trim`, pi, each xi factor and the product pi0*xi1 (pi1*xi0) are
/// clamped to the interval. Without it, non-finite weights raise std::range_error.
WeightSet eif_weights(const Dataset& data, const Eigen::VectorXd& pi1, const Eigen::VectorXd& xi1,
                      Orientation o, const std::optional<TrimInterval>& trim = std::nullopt,
                      const std::string& method = "eif");

/// Logistic fits of D on c_basis (pi) and on b_basis (xi).
std::pair<PropensityFit, PropensityFit> fit_propensities(const Dataset& data,
                                                         const DesignMatrix& c_basis,
                                                         const DesignMatrix& b_basis);

WeightSet true_ps_weights(const Dataset& data, const Eigen::VectorXd& pi1_true,
                          const Eigen::VectorXd& xi1_true, Orientation o);

struct CbpsOptions {
  /// Stack the logit score with the balance moments (over-identified).
  bool include_score = true;
  int max_iter = 500;
};

struct CbpsFit {
  PropensityFit pi;
  PropensityFit xi;
  double objective1 = 0.0;
  double objective2 = 0.0;
  double start_objective1 = 0.0;
  double start_objective2 = 0.0;
  bool converged = false;
  std::vector<std::string> warnings;
};

/// Mean step-1 moments: [(D - pi1) c ; (1-D)/pi0 c - c] at coefficients beta.
Eigen::VectorXd cbps_step1_moments(const Dataset& data, const DesignMatrix& c_basis,
                                   const Eigen::VectorXd& beta, bool include_score);

/// Mean step-2 moments: [(D - xi1) b ; D xi0/(xi1 pi0) b - (1-D)/pi0 b] at gamma.
Eigen::VectorXd cbps_step2_moments(const Dataset& data, const DesignMatrix& b_basis,
                                   const Eigen::VectorXd& gamma, const Eigen::VectorXd& pi0,
                                   bool include_score);

/// Two-step GMM with identity weighting, started at the logistic MLE.
CbpsFit fit_cbps(const Dataset& data, const DesignMatrix& c_basis, const DesignMatrix& b_basis,
                 const CbpsOptions& opts = {});

/// CBPS weights for the given orientation; the exchanged orientation refits
/// the moments with the treatment labels swapped.
WeightSet cbps_weights(const Dataset& data, const DesignMatrix& c_basis,
                       const DesignMatrix& b_basis, Orientation o, const CbpsOptions& opts = {});

}  // namespace medbal
