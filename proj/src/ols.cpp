#include "medbal/ols.hpp"

#include <algorithm>
#include <stdexcept>

namespace medbal {

OlsFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<bool>& mask) {
  if (x.rows() != y.size() || static_cast<Eigen::Index>(mask.size()) != y.size()) {
    throw std::invalid_argument("ols: dimension mismatch");
  }
  const auto g = static_cast<Eigen::Index>(std::count(mask.begin(), mask.end(), true));
  Eigen::MatrixXd xs(g, x.cols());
  Eigen::VectorXd ys(g);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    xs.row(r) = x.row(i);
    ys[r] = y[i];
    ++r;
  }
  OlsFit fit;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
  qr.setThreshold(1e-10);
  if (qr.rank() == x.cols()) {
    fit.coef = qr.solve(ys);
    return fit;
  }
  const auto perm = qr.colsPermutation().indices();
  for (Eigen::Index j = qr.rank(); j < x.cols(); ++j) fit.deficient_columns.push_back(perm[j]);
  std::sort(fit.deficient_columns.begin(), fit.deficient_columns.end());
  Eigen::MatrixXd gram = xs.transpose() * xs;
  gram.diagonal().array() += 1e-10;
  fit.coef = gram.ldlt().solve(xs.transpose() * ys);
  fit.ridge_used = true;
  return fit;
}

}  // namespace medbal
