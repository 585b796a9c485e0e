#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace medbal {

enum class PropensityModel { pi_on_x, xi_on_mx };

/// Fitted P(D = 1 | design) for every row.
struct PropensityFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd fitted;
  PropensityModel model = PropensityModel::pi_on_x;
  bool converged = false;
  bool separation = false;
  int iterations = 0;
  double score_norm = 0.0;
  std::vector<std::string> warnings;
};

struct LogisticOptions {
  int max_iter = 100;
  double score_tol = 1e-11;
  double ridge = 0.0;
};

inline double logistic(double t) {
  return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

/// Maximum-likelihood logit by iteratively reweighted least squares with step
/// halving. Fitted values within 1e-12 of {0, 1} flag separation; the fit is
/// then repeated with a 1e-8 ridge.
PropensityFit fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& d,
                           const LogisticOptions& opts = {});

/// Bernoulli log-likelihood (divided by n) with optional ridge term.
double logistic_loglik(const Eigen::MatrixXd& design, const Eigen::VectorXd& d,
                       const Eigen::VectorXd& coef, double ridge = 0.0);

}  // namespace medbal
