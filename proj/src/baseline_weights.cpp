#include "medbal/baseline_weights.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace medbal {

namespace {

double clamp_to(double p, const std::optional<TrimInterval>& trim) {
  return trim ? std::clamp(p, trim->lower, trim->upper) : p;
}

void normalize_group(Eigen::VectorXd& w, const std::vector<bool>& mask, const char* which) {
  double total = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) total += w[static_cast<Eigen::Index>(i)];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::range_error(std::string("weights for ") + which + " do not have a finite positive sum");
  }
  w /= total;
}

double safe_exp(double t) { return std::exp(std::clamp(t, -700.0, 700.0)); }

struct GmmResult {
  Eigen::VectorXd coef;
  double objective = 0.0;
  double start_objective = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Levenberg-Marquardt on the stacked mean moments g(theta), minimizing g'g.
template <class Moments>
GmmResult levenberg_marquardt(const Moments& moments, Eigen::VectorXd theta, int max_iter) {
  GmmResult res;
  Eigen::MatrixXd jac;
  Eigen::VectorXd g = moments(theta, &jac);
  double q = g.squaredNorm();
  res.start_objective = q;
  double damping = -1.0;
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    const Eigen::VectorXd grad = jac.transpose() * g;
    if (q < 1e-24 || grad.cwiseAbs().maxCoeff() < 1e-12 * (1.0 + q)) {
      res.converged = true;
      break;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-12 * std::max(1.0, jtj.diagonal().maxCoeff()));
    if (damping < 0.0) damping = 1e-3;
    bool accepted = false;
    double q_new = q;
    while (damping < 1e16) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal() += damping * diag;
      const Eigen::VectorXd step = lhs.ldlt().solve(-grad);
      const Eigen::VectorXd cand = theta + step;
      Eigen::MatrixXd cand_jac;
      const Eigen::VectorXd cand_g = moments(cand, &cand_jac);
      q_new = cand_g.squaredNorm();
      if (std::isfinite(q_new) && q_new < q) {
        theta = cand;
        g = cand_g;
        jac = cand_jac;
        damping = std::max(damping / 3.0, 1e-12);
        accepted = true;
        break;
      }
      damping *= 4.0;
    }
    if (!accepted) {
      res.converged = grad.cwiseAbs().maxCoeff() < 1e-6 * (1.0 + q);
      break;
    }
    const double change = q - q_new;
    q = q_new;
    if (change <= 1e-15 * (1.0 + q)) {
      res.converged = true;
      break;
    }
  }
  res.coef = theta;
  res.objective = q;
  return res;
}

Eigen::VectorXd step1_moments_jac(const Dataset& data, const Eigen::MatrixXd& c,
                                  const Eigen::VectorXd& beta, bool include_score,
                                  Eigen::MatrixXd* jac) {
  const auto n = data.n();
  const auto k = c.cols();
  const Eigen::Index offset = include_score ? k : 0;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(offset + k);
  if (jac) *jac = Eigen::MatrixXd::Zero(offset + k, k);
  const Eigen::VectorXd eta = c * beta;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ci = c.row(i).transpose();
    const double p1 = logistic(eta[i]);
    const double e = safe_exp(eta[i]);
    const double ctrl = 1.0 - data.d[i];
    if (include_score) {
      g.head(k) += (data.d[i] - p1) * ci;
      if (jac) jac->topRows(k) -= p1 * (1.0 - p1) * ci * ci.transpose();
    }
    g.tail(k) += (ctrl * (1.0 + e) - 1.0) * ci;
    if (jac && ctrl > 0.0) jac->bottomRows(k) += e * ci * ci.transpose();
  }
  const double nn = static_cast<double>(n);
  g /= nn;
  if (jac) *jac /= nn;
  return g;
}

Eigen::VectorXd step2_moments_jac(const Dataset& data, const Eigen::MatrixXd& b,
                                  const Eigen::VectorXd& gamma, const Eigen::VectorXd& pi0,
                                  bool include_score, Eigen::MatrixXd* jac) {
  const auto n = data.n();
  const auto k = b.cols();
  const Eigen::Index offset = include_score ? k : 0;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(offset + k);
  if (jac) *jac = Eigen::MatrixXd::Zero(offset + k, k);
  const Eigen::VectorXd eta = b * gamma;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto bi = b.row(i).transpose();
    const double x1 = logistic(eta[i]);
    const double odds0 = safe_exp(-eta[i]);
    if (include_score) {
      g.head(k) += (data.d[i] - x1) * bi;
      if (jac) jac->topRows(k) -= x1 * (1.0 - x1) * bi * bi.transpose();
    }
    if (data.d[i] > 0.5) {
      g.tail(k) += odds0 / pi0[i] * bi;
      if (jac) jac->bottomRows(k) -= odds0 / pi0[i] * bi * bi.transpose();
    } else {
      g.tail(k) -= bi / pi0[i];
    }
  }
  const double nn = static_cast<double>(n);
  g /= nn;
  if (jac) *jac /= nn;
  return g;
}

PropensityFit as_fit(const Eigen::MatrixXd& design, const GmmResult& res, PropensityModel model) {
  PropensityFit fit;
  fit.coef = res.coef;
  fit.model = model;
  fit.converged = res.converged;
  fit.iterations = res.iterations;
  fit.fitted = design * res.coef;
  for (Eigen::Index i = 0; i < fit.fitted.size(); ++i) fit.fitted[i] = logistic(fit.fitted[i]);
  return fit;
}

}  // namespace

WeightSet eif_weights(const Dataset& data, const Eigen::VectorXd& pi1, const Eigen::VectorXd& xi1,
                      Orientation o, const std::optional<TrimInterval>& trim,
                      const std::string& method) {
  const auto n = data.n();
  if (pi1.size() != n || xi1.size() != n) {
    throw std::invalid_argument("propensity vectors must have one entry per row");
  }
  WeightSet ws;
  ws.orientation = o;
  ws.method = method;
  ws.w1 = Eigen::VectorXd::Zero(n);
  ws.w2 = Eigen::VectorXd::Zero(n);
  const int level1 = step1_level(o);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Probabilities of the step-1 level (a) and of the other level (b).
    const double pa = clamp_to(level1 == 0 ? 1.0 - pi1[i] : pi1[i], trim);
    const double xa = clamp_to(level1 == 0 ? 1.0 - xi1[i] : xi1[i], trim);
    const double xb = clamp_to(level1 == 0 ? xi1[i] : 1.0 - xi1[i], trim);
    if (static_cast<int>(data.d[i]) == level1) {
      ws.w1[i] = 1.0 / pa;
    } else {
      ws.w2[i] = xa / clamp_to(pa * xb, trim);
    }
  }
  if (!ws.w1.allFinite() || !ws.w2.allFinite()) {
    throw std::range_error("propensity scores at 0 or 1 produce infinite weights; use trimming");
  }
  normalize_group(ws.w1, ws.step1_mask(data), "step 1");
  normalize_group(ws.w2, ws.step2_mask(data), "step 2");
  return ws;
}

std::pair<PropensityFit, PropensityFit> fit_propensities(const Dataset& data,
                                                         const DesignMatrix& c_basis,
                                                         const DesignMatrix& b_basis) {
  PropensityFit pi = fit_logistic(c_basis.values, data.d);
  pi.model = PropensityModel::pi_on_x;
  PropensityFit xi = fit_logistic(b_basis.values, data.d);
  xi.model = PropensityModel::xi_on_mx;
  return {std::move(pi), std::move(xi)};
}

WeightSet true_ps_weights(const Dataset& data, const Eigen::VectorXd& pi1_true,
                          const Eigen::VectorXd& xi1_true, Orientation o) {
  if ((pi1_true.array() <= 0.0).any() || (pi1_true.array() >= 1.0).any() ||
      (xi1_true.array() <= 0.0).any() || (xi1_true.array() >= 1.0).any()) {
    throw std::invalid_argument("true propensity scores must lie strictly inside (0, 1)");
  }
  return eif_weights(data, pi1_true, xi1_true, o, std::nullopt, "true-ps");
}

Eigen::VectorXd cbps_step1_moments(const Dataset& data, const DesignMatrix& c_basis,
                                   const Eigen::VectorXd& beta, bool include_score) {
  return step1_moments_jac(data, c_basis.values, beta, include_score, nullptr);
}

Eigen::VectorXd cbps_step2_moments(const Dataset& data, const DesignMatrix& b_basis,
                                   const Eigen::VectorXd& gamma, const Eigen::VectorXd& pi0,
                                   bool include_score) {
  return step2_moments_jac(data, b_basis.values, gamma, pi0, include_score, nullptr);
}

CbpsFit fit_cbps(const Dataset& data, const DesignMatrix& c_basis, const DesignMatrix& b_basis,
                 const CbpsOptions& opts) {
  data.validate();
  const auto [pi_mle, xi_mle] = fit_propensities(data, c_basis, b_basis);
  CbpsFit out;

  const auto& c = c_basis.values;
  auto m1 = [&](const Eigen::VectorXd& beta, Eigen::MatrixXd* jac) {
    return step1_moments_jac(data, c, beta, opts.include_score, jac);
  };
  const GmmResult r1 = levenberg_marquardt(m1, pi_mle.coef, opts.max_iter);
  out.pi = as_fit(c, r1, PropensityModel::pi_on_x);
  out.objective1 = r1.objective;
  out.start_objective1 = r1.start_objective;

  const Eigen::VectorXd pi0 = (1.0 - out.pi.fitted.array()).cwiseMax(1e-300).matrix();
  const auto& b = b_basis.values;
  auto m2 = [&](const Eigen::VectorXd& gamma, Eigen::MatrixXd* jac) {
    return step2_moments_jac(data, b, gamma, pi0, opts.include_score, jac);
  };
  const GmmResult r2 = levenberg_marquardt(m2, xi_mle.coef, opts.max_iter);
  out.xi = as_fit(b, r2, PropensityModel::xi_on_mx);
  out.objective2 = r2.objective;
  out.start_objective2 = r2.start_objective;

  out.converged = r1.converged && r2.converged;
  auto note = [&](int step, const GmmResult& r) {
    if (r.converged) return;
    std::ostringstream msg;
    msg << "CBPS step " << step << " GMM did not converge (objective " << r.objective << ")";
    out.warnings.push_back(msg.str());
  };
  note(1, r1);
  note(2, r2);
  return out;
}

WeightSet cbps_weights(const Dataset& data, const DesignMatrix& c_basis,
                       const DesignMatrix& b_basis, Orientation o, const CbpsOptions& opts) {
  if (o == Orientation::standard) {
    const CbpsFit fit = fit_cbps(data, c_basis, b_basis, opts);
    WeightSet ws = eif_weights(data, fit.pi.fitted, fit.xi.fitted, o, std::nullopt, "cbps");
    ws.warnings = fit.warnings;
    return ws;
  }
  const Dataset flipped = data.with_flipped_treatment();
  const CbpsFit fit = fit_cbps(flipped, c_basis, b_basis, opts);
  WeightSet ws = eif_weights(flipped, fit.pi.fitted, fit.xi.fitted, Orientation::standard,
                             std::nullopt, "cbps");
  ws.orientation = Orientation::exchanged;
  ws.warnings = fit.warnings;
  return ws;
}

}  // namespace medbal
