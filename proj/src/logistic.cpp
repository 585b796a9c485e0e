#include "medbal/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace medbal {

namespace {

double log1pexp(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

PropensityFit irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& d, const LogisticOptions& opts) {
  const auto n = static_cast<double>(x.rows());
  const auto p = x.cols();
  PropensityFit fit;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = logistic_loglik(x, d, beta, opts.ridge);
  for (int it = 0; it < opts.max_iter; ++it) {
    fit.iterations = it + 1;
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd prob(eta.size()), wt(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      prob[i] = logistic(eta[i]);
      wt[i] = prob[i] * (1.0 - prob[i]);
    }
    const Eigen::VectorXd score = x.transpose() * (d - prob) / n - opts.ridge * beta;
    fit.score_norm = score.cwiseAbs().maxCoeff();
    if (fit.score_norm < opts.score_tol) {
      fit.converged = true;
      break;
    }
    Eigen::MatrixXd info = x.transpose() * wt.asDiagonal() * x / n;
    info.diagonal().array() += opts.ridge + 1e-14;
    const Eigen::VectorXd step = info.ldlt().solve(score);
    double alpha = 1.0;
    bool improved = false;
    for (int h = 0; h < 40; ++h) {
      const Eigen::VectorXd cand = beta + alpha * step;
      const double cand_ll = logistic_loglik(x, d, cand, opts.ridge);
      // a full step within rounding of the current likelihood is taken near the optimum
      const double slack = h == 0 ? 1e-12 * (1.0 + std::abs(ll)) : 1e-15 * std::abs(ll);
      if (std::isfinite(cand_ll) && cand_ll >= ll - slack) {
        beta = cand;
        ll = cand_ll;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
  }
  fit.coef = beta;
  fit.fitted = x * beta;
  for (Eigen::Index i = 0; i < fit.fitted.size(); ++i) fit.fitted[i] = logistic(fit.fitted[i]);
  return fit;
}

}  // namespace

double logistic_loglik(const Eigen::MatrixXd& design, const Eigen::VectorXd& d,
                       const Eigen::VectorXd& coef, double ridge) {
  const Eigen::VectorXd eta = design * coef;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += d[i] * eta[i] - log1pexp(eta[i]);
  return ll / static_cast<double>(eta.size()) - 0.5 * ridge * coef.squaredNorm();
}

PropensityFit fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& d,
                           const LogisticOptions& opts) {
  if (design.rows() != d.size()) throw std::invalid_argument("logistic: design rows differ from d");
  const double treated = d.sum();
  if (treated <= 0.0 || treated >= static_cast<double>(d.size())) {
    throw std::invalid_argument("logistic: both classes must be present");
  }
  PropensityFit fit = irls(design, d, opts);
  auto separated = [](const PropensityFit& f) {
    return ((f.fitted.array() < 1e-12) || (f.fitted.array() > 1.0 - 1e-12)).any();
  };
  if (separated(fit) || !fit.coef.allFinite()) {
    LogisticOptions ridged = opts;
    ridged.ridge = std::max(opts.ridge, 1e-8);
    fit = irls(design, d, ridged);
    fit.separation = true;
    fit.warnings.push_back("separation detected in logistic fit; ridge 1e-8 applied");
  }
  if (!fit.converged) fit.warnings.push_back("logistic fit did not converge");
  return fit;
}

}  // namespace medbal
