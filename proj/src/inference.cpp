#include "medbal/inference.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <stdexcept>

namespace medbal {

std::string to_string(EstimatorFamily f) {
  switch (f) {
    case EstimatorFamily::eif:
      return "eif";
    case EstimatorFamily::ipw:
      return "ipw";
    case EstimatorFamily::regression_imputation:
      return "ri";
  }
  return "unknown";
}

InfluenceVector level_influence(const Dataset& data, const WeightPair& w, const NuisanceFit& nf,
                                Estimand level, double theta_hat, EstimatorFamily family) {
  if (family == EstimatorFamily::regression_imputation) {
    throw std::invalid_argument("influence contributions are not defined for regression imputation");
  }
  const auto n = static_cast<double>(data.n());
  const Eigen::VectorXd& y = data.y;
  Eigen::VectorXd phi;
  switch (level) {
    case Estimand::theta_10:
      phi = n * w.standard.w2.cwiseProduct(y - nf.mu1) +
            n * w.standard.w1.cwiseProduct(nf.mu1 - nf.eta10) + nf.eta10;
      break;
    case Estimand::theta_01:
      phi = n * w.exchanged.w2.cwiseProduct(y - nf.mu0) +
            n * w.exchanged.w1.cwiseProduct(nf.mu0 - nf.eta01) + nf.eta01;
      break;
    case Estimand::theta_1:
      phi = n * w.exchanged.w1.cwiseProduct(y - nf.m1) + nf.m1;
      break;
    case Estimand::theta_0:
      phi = n * w.standard.w1.cwiseProduct(y - nf.m0) + nf.m0;
      break;
    default:
      throw std::invalid_argument(to_string(level) + " is an effect, not a level");
  }
  InfluenceVector out;
  out.values = phi.array() - theta_hat;
  out.estimand = level;
  out.family = family;
  return out;
}

double variance_theta(const Dataset& data, const WeightPair& weights, const NuisanceFit& nuis,
                      Estimand level, double theta_hat, EstimatorFamily family) {
  const InfluenceVector phi = level_influence(data, weights, nuis, level, theta_hat, family);
  return phi.values.squaredNorm() / static_cast<double>(phi.values.size());
}

InfluenceVector effect_influence(const InfluenceVector& a, const InfluenceVector& b,
                                 Estimand effect) {
  if (a.values.size() != b.values.size()) {
    throw std::invalid_argument("influence vectors have different lengths");
  }
  InfluenceVector out;
  out.values = a.values - b.values;
  out.estimand = effect;
  out.family = a.family;
  return out;
}

double estimator_variance(const InfluenceVector& phi) {
  const auto n = static_cast<double>(phi.values.size());
  return phi.values.squaredNorm() / n / n;
}

double variance_effect(const InfluenceVector& a, const InfluenceVector& b) {
  return estimator_variance(effect_influence(a, b, Estimand::ate));
}

Interval confidence_interval(double estimate, double se, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must be in (0, 1)");
  const double z = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
  return {estimate - z * se, estimate + z * se};
}

double p_value(double estimate, double se) {
  if (se <= 0.0) return estimate == 0.0 ? 1.0 : 0.0;
  return std::erfc(std::abs(estimate / se) / std::sqrt(2.0));
}

PointEstimates EstimateReport::points() const {
  PointEstimates p;
  for (auto e : kAllEstimands) p[e] = (*this)[e].estimate;
  return p;
}

EstimateReport build_report(const Dataset& data, const WeightPair& weights,
                            const NuisanceFit& nuis, EstimatorFamily family, double level) {
  EstimateReport rep;
  rep.family = family;
  rep.level = level;
  PointEstimates pts;
  switch (family) {
    case EstimatorFamily::eif:
      pts = estimate_eif_type(data, weights, nuis);
      rep.method = weights.standard.method;
      break;
    case EstimatorFamily::ipw:
      pts = estimate_ipw_type(data, weights);
      rep.method = weights.standard.method;
      break;
    case EstimatorFamily::regression_imputation:
      pts = estimate_regression_imputation(nuis);
      rep.method = "ri";
      break;
  }
  for (auto e : kAllEstimands) {
    auto& row = rep.rows[static_cast<std::size_t>(e)];
    row.estimand = e;
    row.estimate = pts[e];
  }
  if (family == EstimatorFamily::regression_imputation) return rep;

  std::array<InfluenceVector, 4> levels;
  for (auto e : {Estimand::theta_10, Estimand::theta_01, Estimand::theta_1, Estimand::theta_0}) {
    levels[static_cast<std::size_t>(e)] = level_influence(data, weights, nuis, e, pts[e], family);
  }
  for (auto e : kAllEstimands) {
    auto& row = rep.rows[static_cast<std::size_t>(e)];
    double var;
    if (is_effect(e)) {
      const auto [a, b] = effect_components(e);
      var = variance_effect(levels[static_cast<std::size_t>(a)], levels[static_cast<std::size_t>(b)]);
    } else {
      var = estimator_variance(levels[static_cast<std::size_t>(e)]);
    }
    row.variance = var;
    row.se = std::sqrt(var);
    row.ci = confidence_interval(row.estimate, *row.se, level);
    row.p = p_value(row.estimate, *row.se);
  }
  return rep;
}

}  // namespace medbal
