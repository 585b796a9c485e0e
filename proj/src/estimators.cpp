#include "medbal/estimators.hpp"

#include "medbal/ols.hpp"

#include <sstream>
#include <stdexcept>

namespace medbal {

namespace {

struct Fitted {
  Eigen::VectorXd coef;
  Eigen::VectorXd values;
};

Fitted ols_predict(const DesignMatrix& basis, const Eigen::VectorXd& y,
                   const std::vector<bool>& mask, const char* label,
                   std::vector<std::string>& warnings) {
  const OlsFit fit = fit_ols(basis.values, y, mask);
  if (fit.ridge_used) {
    std::ostringstream msg;
    msg << label << ": rank-deficient design, ridge 1e-10 applied; aliased columns:";
    for (auto j : fit.deficient_columns) msg << ' ' << basis.column_names[static_cast<std::size_t>(j)];
    warnings.push_back(msg.str());
  }
  return {fit.coef, basis.values * fit.coef};
}

}  // namespace

NuisanceFit fit_nuisances(const Dataset& data, const DesignMatrix& b_basis,
                          const DesignMatrix& c_basis) {
  if (b_basis.rows() != data.n() || c_basis.rows() != data.n()) {
    throw std::invalid_argument("nuisance bases must have one row per observation");
  }
  const auto treated = group_mask(data, 1);
  const auto control = group_mask(data, 0);
  NuisanceFit nf;
  auto mu1 = ols_predict(b_basis, data.y, treated, "mu1", nf.warnings);
  auto mu0 = ols_predict(b_basis, data.y, control, "mu0", nf.warnings);
  auto eta10 = ols_predict(c_basis, mu1.values, control, "eta10", nf.warnings);
  auto eta01 = ols_predict(c_basis, mu0.values, treated, "eta01", nf.warnings);
  auto m1 = ols_predict(c_basis, data.y, treated, "m1", nf.warnings);
  auto m0 = ols_predict(c_basis, data.y, control, "m0", nf.warnings);
  nf.mu1 = std::move(mu1.values);
  nf.coef_mu1 = std::move(mu1.coef);
  nf.mu0 = std::move(mu0.values);
  nf.coef_mu0 = std::move(mu0.coef);
  nf.eta10 = std::move(eta10.values);
  nf.coef_eta10 = std::move(eta10.coef);
  nf.eta01 = std::move(eta01.values);
  nf.coef_eta01 = std::move(eta01.coef);
  nf.m1 = std::move(m1.values);
  nf.coef_m1 = std::move(m1.coef);
  nf.m0 = std::move(m0.values);
  nf.coef_m0 = std::move(m0.coef);
  return nf;
}

std::string to_string(Estimand e) {
  switch (e) {
    case Estimand::theta_10:
      return "theta_10";
    case Estimand::theta_01:
      return "theta_01";
    case Estimand::theta_1:
      return "theta_1";
    case Estimand::theta_0:
      return "theta_0";
    case Estimand::nde0:
      return "NDE(0)";
    case Estimand::nde1:
      return "NDE(1)";
    case Estimand::nie0:
      return "NIE(0)";
    case Estimand::nie1:
      return "NIE(1)";
    case Estimand::ate:
      return "ATE";
  }
  return "unknown";
}

Estimand parse_estimand(const std::string& name) {
  for (auto e : kAllEstimands) {
    if (to_string(e) == name) return e;
  }
  throw std::invalid_argument("unknown estimand '" + name + "'");
}

std::pair<Estimand, Estimand> effect_components(Estimand e) {
  switch (e) {
    case Estimand::nde0:
      return {Estimand::theta_10, Estimand::theta_0};
    case Estimand::nde1:
      return {Estimand::theta_1, Estimand::theta_01};
    case Estimand::nie0:
      return {Estimand::theta_01, Estimand::theta_0};
    case Estimand::nie1:
      return {Estimand::theta_1, Estimand::theta_10};
    case Estimand::ate:
      return {Estimand::theta_1, Estimand::theta_0};
    default:
      throw std::invalid_argument(to_string(e) + " is not an effect");
  }
}

bool is_effect(Estimand e) {
  return e == Estimand::nde0 || e == Estimand::nde1 || e == Estimand::nie0 ||
         e == Estimand::nie1 || e == Estimand::ate;
}

PointEstimates PointEstimates::from_levels(double theta_10, double theta_01, double theta_1,
                                           double theta_0) {
  PointEstimates p;
  p[Estimand::theta_10] = theta_10;
  p[Estimand::theta_01] = theta_01;
  p[Estimand::theta_1] = theta_1;
  p[Estimand::theta_0] = theta_0;
  for (auto e : kAllEstimands) {
    if (!is_effect(e)) continue;
    const auto [a, b] = effect_components(e);
    p[e] = p[a] - p[b];
  }
  return p;
}

PointEstimates estimate_eif_type(const Dataset& data, const WeightPair& w, const NuisanceFit& nf) {
  const auto& y = data.y;
  const auto& s = w.standard;
  const auto& x = w.exchanged;
  const double t10 = s.w2.dot(y - nf.mu1) + s.w1.dot(nf.mu1 - nf.eta10) + nf.eta10.mean();
  const double t01 = x.w2.dot(y - nf.mu0) + x.w1.dot(nf.mu0 - nf.eta01) + nf.eta01.mean();
  const double t1 = x.w1.dot(y - nf.m1) + nf.m1.mean();
  const double t0 = s.w1.dot(y - nf.m0) + nf.m0.mean();
  return PointEstimates::from_levels(t10, t01, t1, t0);
}

PointEstimates estimate_ipw_type(const Dataset& data, const WeightPair& w) {
  const auto& y = data.y;
  return PointEstimates::from_levels(w.standard.w2.dot(y), w.exchanged.w2.dot(y),
                                     w.exchanged.w1.dot(y), w.standard.w1.dot(y));
}

PointEstimates estimate_regression_imputation(const NuisanceFit& nf) {
  return PointEstimates::from_levels(nf.eta10.mean(), nf.eta01.mean(), nf.m1.mean(),
                                     nf.m0.mean());
}

}  // namespace medbal
