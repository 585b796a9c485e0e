#include "medbal/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace medbal {

const BalanceRow* BalanceTable::find(const std::string& column) const {
  for (const auto& r : rows) {
    if (r.column == column) return &r;
  }
  return nullptr;
}

double BalanceTable::max_value() const {
  double m = 0.0;
  for (const auto& r : rows) {
    if (r.tasmd_cp) m = std::max(m, *r.tasmd_cp);
    if (r.tasmd_tc) m = std::max(m, *r.tasmd_tc);
  }
  return m;
}

double group_sd(const Eigen::VectorXd& x, const std::vector<bool>& mask) {
  double sum = 0.0;
  double count = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    sum += x[i];
    count += 1.0;
  }
  if (count < 2.0) return 0.0;
  const double mean = sum / count;
  double ss = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (mask[static_cast<std::size_t>(i)]) ss += (x[i] - mean) * (x[i] - mean);
  }
  return std::sqrt(ss / (count - 1.0));
}

namespace {

bool is_constant(const Eigen::VectorXd& x) {
  return x.size() == 0 || x.maxCoeff() - x.minCoeff() <= 1e-12 * (1.0 + std::abs(x.maxCoeff()));
}

std::optional<double> standardized(double diff, double sd) {
  if (!(sd > 1e-12)) return std::nullopt;
  return std::abs(diff) / sd;
}

}  // namespace

BalanceTable tasmd(const Dataset& data, const WeightSet& ws, const DesignMatrix& c_basis,
                   const DesignMatrix& b_basis) {
  BalanceTable table;
  table.method = ws.method;
  const auto m1 = ws.step1_mask(data);
  const auto m2 = ws.step2_mask(data);
  auto row_for = [&](const std::string& name) -> BalanceRow& {
    for (auto& r : table.rows) {
      if (r.column == name) return r;
    }
    table.rows.push_back({name, std::nullopt, std::nullopt});
    return table.rows.back();
  };
  for (Eigen::Index j = 0; j < c_basis.cols(); ++j) {
    const Eigen::VectorXd col = c_basis.values.col(j);
    if (is_constant(col)) continue;
    auto& r = row_for(c_basis.column_names[static_cast<std::size_t>(j)]);
    r.tasmd_cp = standardized(ws.w1.dot(col) - col.mean(), group_sd(col, m1));
  }
  for (Eigen::Index j = 0; j < b_basis.cols(); ++j) {
    const Eigen::VectorXd col = b_basis.values.col(j);
    if (is_constant(col)) continue;
    auto& r = row_for(b_basis.column_names[static_cast<std::size_t>(j)]);
    r.tasmd_tc = standardized(ws.w2.dot(col) - ws.w1.dot(col), group_sd(col, m2));
  }
  return table;
}

void write_balance_csv(const std::vector<BalanceTable>& tables, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "column,metric,value,method\n";
  auto put = [&](const std::string& col, const char* metric, const std::optional<double>& v,
                 const std::string& method) {
    out << col << ',' << metric << ',';
    if (v) {
      out << *v;
    } else {
      out << "NA";
    }
    out << ',' << method << '\n';
  };
  for (const auto& t : tables) {
    for (const auto& r : t.rows) {
      put(r.column, "tasmd_cp", r.tasmd_cp, t.method);
      put(r.column, "tasmd_tc", r.tasmd_tc, t.method);
    }
  }
}

}  // namespace medbal
