#pragma once

#include "medbal/data.hpp"
#include "medbal/minimal_weights.hpp"

#include <optional>
#include <string>
#include <vector>

namespace medbal {

/// Target absolute standardized mean differences for one basis column.
///
/// tasmd_cp = |sum w1 c - mean_full c| / s_c   (s_c: sd within the step-1 group)
/// tasmd_tc = |sum w2 b - sum w1 b| / s_t      (s_t: sd within the step-2 group)
/// Entries are empty when the column is absent from that basis or has zero sd.
struct BalanceRow {
  std::string column;
  std::optional<double> tasmd_cp;
  std::optional<double> tasmd_tc;
};

struct BalanceTable {
  std::string method;
  std::vector<BalanceRow> rows;

  const BalanceRow* find(const std::string& column) const;
  /// Largest available entry of either metric (0 for an empty table).
  double max_value() const;
};

/// Constant columns are skipped; columns are merged by name, c_basis first.
BalanceTable tasmd(const Dataset& data, const WeightSet& weights, const DesignMatrix& c_basis,
                   const DesignMatrix& b_basis);

/// Sample standard deviation (n - 1 divisor) over rows with mask = true.
double group_sd(const Eigen::VectorXd& x, const std::vector<bool>& mask);

/// Long format: column,metric,value,method (NA for unavailable entries).
void write_balance_csv(const std::vector<BalanceTable>& tables, const std::string& path);

}  // namespace medbal
