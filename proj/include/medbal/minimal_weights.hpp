#pragma once

#include "medbal/data.hpp"
#include "medbal/dual_solver.hpp"
#include "medbal/penalty.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace medbal {

/// standard: step 1 reweights controls, step 2 reweights treated.
/// exchanged: the roles of D = 1 and D = 0 are swapped throughout.
enum class Orientation { standard, exchanged };

std::string to_string(Orientation o);

/// Two-step weights stored on the full sample (zero outside the weighted group).
///
/// w1 lives on the step-1 group (controls in the standard orientation) and
/// balances it toward the full sample; w2 lives on the other group and
/// balances it toward the w1-reweighted step-1 group.
struct WeightSet {
  Eigen::VectorXd w1;
  Eigen::VectorXd w2;
  Orientation orientation = Orientation::standard;
  std::string method = "mw";
  Eigen::VectorXd eps;
  Eigen::VectorXd delta;
  std::optional<DualSolution> step1;
  std::optional<DualSolution> step2;
  std::vector<std::string> warnings;

  /// Rows that carry w1 (D = 0 for standard, D = 1 for exchanged).
  std::vector<bool> step1_mask(const Dataset& data) const;
  std::vector<bool> step2_mask(const Dataset& data) const;
};

std::vector<bool> group_mask(const Dataset& data, int treatment_level);
int step1_level(Orientation o);

/// Scalar tolerance on every non-constant column, 0 on the constant.
Eigen::VectorXd broadcast_tolerance(const DesignMatrix& basis, double tol);

struct TwoStepOptions {
  SolverConfig solver;
  /// Throw NumericalError when either step fails to converge.
  bool require_convergence = true;
};

/// Step 1: balance the step-1 group toward the full-sample mean of c_basis.
DualSolution fit_step1(const Dataset& data, const DesignMatrix& c_basis, const Eigen::VectorXd& eps,
                       const Penalty& penalty, Orientation o, const SolverConfig& cfg = {});

/// Step 2: balance the other group toward sum_i w1_i b_i over the step-1 group.
DualSolution fit_step2(const Dataset& data, const DesignMatrix& b_basis, const Eigen::VectorXd& w1,
                       const Eigen::VectorXd& delta, const Penalty& penalty, Orientation o,
                       const SolverConfig& cfg = {});

WeightSet fit_two_step(const Dataset& data, const DesignMatrix& c_basis,
                       const DesignMatrix& b_basis, const Eigen::VectorXd& eps,
                       const Eigen::VectorXd& delta, const Penalty& penalty, Orientation o,
                       const TwoStepOptions& opts = {});

WeightSet fit_two_step(const Dataset& data, const DesignMatrix& c_basis,
                       const DesignMatrix& b_basis, double eps, double delta,
                       const Penalty& penalty, Orientation o, const TwoStepOptions& opts = {});

/// Expands masked-row weights to a full-length vector.
Eigen::VectorXd scatter(const std::vector<bool>& mask, const Eigen::VectorXd& masked);

/// Long-format rows (row_id, group, step, weight) for nonzero-support entries.
void write_weights_csv(const Dataset& data, const WeightSet& ws, const std::string& path);

}  // namespace medbal
