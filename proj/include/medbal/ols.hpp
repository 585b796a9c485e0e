#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace medbal {

struct OlsFit {
  Eigen::VectorXd coef;
  bool ridge_used = false;
  std::vector<Eigen::Index> deficient_columns;
};

/// Least squares of y on x over rows with mask = true. A rank-deficient Gram
/// matrix falls back to a 1e-10 ridge and lists the aliased columns.
OlsFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<bool>& mask);

}  // namespace medbal
