#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace medbal {

/// Input validation failure (bad CSV, unknown column, degenerate covariate).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Outcome, binary treatment, mediator block and covariates, row-aligned.
///
/// `d` holds 0/1 as doubles so it can enter arithmetic directly.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXd d;
  Eigen::MatrixXd m;  // n x q, q >= 1
  Eigen::MatrixXd x;  // n x p, p >= 0
  std::string outcome_name = "y";
  std::string treatment_name = "d";
  std::vector<std::string> mediator_names;
  std::vector<std::string> covariate_names;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index treated_count() const;
  Eigen::Index control_count() const { return n() - treated_count(); }

  /// Throws DataError if shapes disagree, d is not binary, a group is empty
  /// or any entry is non-finite.
  void validate() const;

  /// Mediator or covariate column by name.
  std::optional<Eigen::VectorXd> column(const std::string& name) const;
  bool is_mediator(const std::string& name) const;

  /// Copy with D replaced by 1 - D.
  Dataset with_flipped_treatment() const;
};

struct ColumnRoles {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> mediators;
  std::vector<std::string> covariates;
  /// For a two-level textual treatment: the level coded as D = 0.
  std::optional<std::string> reference_level;
};

Dataset load_csv(const std::filesystem::path& path, const ColumnRoles& roles);

/// Writes every value with shortest round-trip formatting.
void write_csv(const Dataset& data, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Basis expansions c_j(X) and b_j(M, X)
// ---------------------------------------------------------------------------

enum class TermKind { raw, power, interaction, constant };

struct Term {
  TermKind kind = TermKind::raw;
  std::vector<std::string> columns;  // one column for raw/power, 2-3 for interactions
  int power = 1;

  std::string name() const;
  bool operator==(const Term&) const = default;

  static Term raw(std::string column);
  static Term pow(std::string column, int k);
  static Term interaction(std::vector<std::string> columns);
  static Term constant();
};

/// Parses "x1", "x1^2", "m*x1", "x1*x2*x3" or "1".
Term parse_term(const std::string& text);

struct BasisSpec {
  std::vector<Term> terms;
  bool include_constant = true;
  bool standardize = false;

  /// Raw columns only, in the given order.
  static BasisSpec linear(const std::vector<std::string>& columns, bool include_constant = true);
};

enum class BasisScope { covariates, covariates_and_mediators };

struct ColumnTransform {
  double center = 0.0;
  double scale = 1.0;
};

struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> column_names;
  BasisSpec source_spec;
  /// Standardization statistics per raw column, frozen at construction.
  std::map<std::string, ColumnTransform> transforms;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  std::optional<Eigen::Index> constant_column() const;
  /// Number of columns excluding the constant.
  Eigen::Index non_constant_cols() const;
};

DesignMatrix build_basis(const Dataset& data, const BasisSpec& spec, BasisScope scope);

/// Same as above but reuses previously frozen standardization statistics.
DesignMatrix build_basis(const Dataset& data, const BasisSpec& spec, BasisScope scope,
                         const std::map<std::string, ColumnTransform>& frozen);

/// Raw terms, powers up to `degree` (skipped for dummies, i.e. columns with
/// at most two distinct values), then all interactions of order 2..`interaction_order`.
BasisSpec polynomial_basis(const Dataset& data, const std::vector<std::string>& columns,
                           int degree, int interaction_order, bool include_constant = true);

}  // namespace medbal
