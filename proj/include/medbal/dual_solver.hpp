#pragma once

#include "medbal/penalty.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace medbal {

/// Failure of a numerical routine (non-convergence, infeasibility, overflow).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// min sum_i a_i f(w_i)  s.t.  |sum_i a_i w_i Phi_ij - t_j| <= tol_j
///
/// `mask` marks the rows a_i = 1 that receive weights; `design` has one row per
/// unit of the full sample.
struct BalancingProblem {
  std::vector<bool> mask;
  Eigen::MatrixXd design;
  std::vector<std::string> column_names;
  Eigen::VectorXd target;
  Eigen::VectorXd tolerances;
  Penalty penalty;

  Eigen::Index masked_count() const;
  /// Throws std::invalid_argument on inconsistent dimensions, negative
  /// tolerances or an empty mask.
  void validate() const;
  /// Masked rows of the design, in row order.
  Eigen::MatrixXd masked_design() const;
};

struct SolverConfig {
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  double residual_tol = 1e-8;
  int max_iter = 10000;
  double step_init = 1.0;
  /// Second-order (proximal Newton) steps; off means accelerated proximal gradient only.
  bool acceleration = true;
};

enum class SolveStatus { converged, max_iter, infeasible_suspected };

std::string to_string(SolveStatus status);

struct DualSolution {
  Eigen::VectorXd lambda;   // one entry per design column; 0 for dropped columns
  Eigen::VectorXd weights;  // one entry per masked row
  int iterations = 0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;  // value of the minimized dual, so gap = primal + dual
  double duality_gap = 0.0;
  double max_violation = 0.0;
  double first_order_residual = 0.0;
  SolveStatus status = SolveStatus::max_iter;
  std::vector<Eigen::Index> dropped_columns;
  std::vector<std::string> warnings;

  bool converged() const { return status == SolveStatus::converged; }
};

struct KktCertificate {
  Eigen::VectorXd violation;        // sum a_i w_i Phi_ij - t_j
  Eigen::VectorXd excess;           // max(|violation_j| - tol_j, 0)
  Eigen::VectorXd slackness;        // |lambda_j| (tol_j - |violation_j|)
  double duality_gap = 0.0;
  double max_violation = 0.0;
  double max_slackness = 0.0;
};

DualSolution solve_dual(const BalancingProblem& prob, const SolverConfig& cfg = {});

/// sum over masked rows of f(w_i); `weights` has one entry per masked row.
double primal_objective(const BalancingProblem& prob, const Eigen::VectorXd& weights);

/// sum_mask rho(Phi_i' lambda) - lambda' t + |lambda|' tol.
double dual_objective(const BalancingProblem& prob, const Eigen::VectorXd& lambda);

/// Gradient of the smooth part: sum_mask rho'(Phi_i' lambda) Phi_i - t.
Eigen::VectorXd dual_gradient(const BalancingProblem& prob, const Eigen::VectorXd& lambda);

KktCertificate check_kkt(const BalancingProblem& prob, const DualSolution& sol);

}  // namespace medbal
