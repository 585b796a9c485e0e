#pragma once

#include "medbal/data.hpp"
#include "medbal/dual_solver.hpp"
#include "medbal/minimal_weights.hpp"
#include "medbal/penalty.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace medbal {

struct TuningOptions {
  int grid_size = 100;
  int bootstrap_reps = 50;
  std::uint64_t seed = 1;
  int workers = 1;
  Orientation orientation = Orientation::standard;
  SolverConfig solver;
  /// Explicit candidate lists override the default grids.
  std::optional<std::vector<double>> grid_eps;
  std::optional<std::vector<double>> grid_delta;
};

struct TuningResult {
  std::vector<double> grid_eps;
  std::vector<double> grid_delta;
  std::vector<double> score_eps;    // C-bar per candidate (+inf on solver failure)
  std::vector<double> score_delta;  // B-bar per candidate
  double eps_star = 0.0;
  double delta_star = 0.0;
  int bootstrap_reps = 0;
  std::uint64_t seed = 0;
  Orientation orientation = Orientation::standard;
  std::vector<std::string> notes;
};

/// size points from 0 to upper inclusive.
std::vector<double> tolerance_grid(int size, double upper);

/// Bootstrap multiplicity of each row in one resample of size n.
std::vector<int> bootstrap_counts(Eigen::Index n, std::uint64_t seed, std::uint64_t candidate,
                                  std::uint64_t replicate);

/// C_r: sum over non-constant c columns of
/// |sum_i count_i w1_i c_ij - mean_full(c_j)| / sd_full(c_j).
double step1_imbalance(const DesignMatrix& c_basis, const Eigen::VectorXd& w1,
                       const std::vector<int>& counts);

/// B_r: sum over non-constant b columns of
/// |sum_i count_i w2_i b_ij - sum_i w1_i b_ij| / sd_full(b_j).
double step2_imbalance(const DesignMatrix& b_basis, const Eigen::VectorXd& w1,
                       const Eigen::VectorXd& w2, const std::vector<int>& counts);

/// Bootstrap selection of scalar tolerances (eps*, delta*), one step at a time.
TuningResult tune_tolerances(const Dataset& data, const DesignMatrix& c_basis,
                             const DesignMatrix& b_basis, const Penalty& penalty,
                             const TuningOptions& opts = {});

}  // namespace medbal
