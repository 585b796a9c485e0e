#include "medbal/dual_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace medbal {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::max_iter:
      return "max_iter";
    case SolveStatus::infeasible_suspected:
      return "infeasible-suspected";
  }
  return "unknown";
}

Eigen::Index BalancingProblem::masked_count() const {
  return static_cast<Eigen::Index>(std::count(mask.begin(), mask.end(), true));
}

void BalancingProblem::validate() const {
  const auto k = design.cols();
  if (static_cast<Eigen::Index>(mask.size()) != design.rows()) {
    throw std::invalid_argument("balancing problem: mask length differs from design rows");
  }
  if (target.size() != k || tolerances.size() != k) {
    throw std::invalid_argument("balancing problem: target/tolerances must match design columns");
  }
  if (!column_names.empty() && static_cast<Eigen::Index>(column_names.size()) != k) {
    throw std::invalid_argument("balancing problem: column names must match design columns");
  }
  if ((tolerances.array() < 0.0).any() || !tolerances.allFinite()) {
    throw std::invalid_argument("balancing problem: tolerances must be finite and nonnegative");
  }
  if (masked_count() == 0) throw std::invalid_argument("balancing problem: empty mask");
  if (!design.allFinite() || !target.allFinite()) {
    throw std::invalid_argument("balancing problem: non-finite design or target");
  }
}

Eigen::MatrixXd BalancingProblem::masked_design() const {
  Eigen::MatrixXd out(masked_count(), design.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    if (mask[static_cast<std::size_t>(i)]) out.row(r++) = design.row(i);
  }
  return out;
}

double primal_objective(const BalancingProblem& prob, const Eigen::VectorXd& weights) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) total += prob.penalty.value(weights[i]);
  return total;
}

double dual_objective(const BalancingProblem& prob, const Eigen::VectorXd& lambda) {
  const Eigen::VectorXd z = prob.masked_design() * lambda;
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) total += rho(prob.penalty, z[i]);
  return total - lambda.dot(prob.target) + prob.tolerances.dot(lambda.cwiseAbs());
}

Eigen::VectorXd dual_gradient(const BalancingProblem& prob, const Eigen::VectorXd& lambda) {
  const Eigen::MatrixXd phi = prob.masked_design();
  const Eigen::VectorXd z = phi * lambda;
  Eigen::VectorXd w(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) w[i] = rho_prime(prob.penalty, z[i]);
  return phi.transpose() * w - prob.target;
}

KktCertificate check_kkt(const BalancingProblem& prob, const DualSolution& sol) {
  const Eigen::MatrixXd phi = prob.masked_design();
  KktCertificate cert;
  cert.violation = phi.transpose() * sol.weights - prob.target;
  const auto k = phi.cols();
  cert.excess = Eigen::VectorXd::Zero(k);
  cert.slackness = Eigen::VectorXd::Zero(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    if (std::find(sol.dropped_columns.begin(), sol.dropped_columns.end(), j) !=
        sol.dropped_columns.end()) {
      continue;
    }
    const double v = cert.violation[j];
    cert.excess[j] = std::max(std::abs(v) - prob.tolerances[j], 0.0);
    cert.slackness[j] = std::abs(sol.lambda[j]) * (prob.tolerances[j] - std::abs(v));
  }
  cert.duality_gap = primal_objective(prob, sol.weights) + dual_objective(prob, sol.lambda);
  cert.max_violation = k > 0 ? cert.excess.maxCoeff() : 0.0;
  cert.max_slackness = k > 0 ? cert.slackness.cwiseAbs().maxCoeff() : 0.0;
  return cert;
}

namespace {

double soft_threshold(double x, double thr) {
  if (x > thr) return x - thr;
  if (x < -thr) return x + thr;
  return 0.0;
}

bool constant_column(const Eigen::VectorXd& x) {
  const double hi = x.maxCoeff();
  return hi - x.minCoeff() <= 1e-12 * (1.0 + std::abs(hi));
}

// Dual over the retained columns in coordinates mu, lambda = T mu. Columns are
// centered against the zero-tolerance constant and scaled to unit RMS, which
// keeps the L1 term separable; with no positive tolerance they are also
// orthonormalized.
class Reparameterized {
 public:
  Reparameterized(const Eigen::MatrixXd& phi, const Eigen::VectorXd& target,
                  const Eigen::VectorXd& tol, const Penalty& pen)
      : pen_(pen) {
    const auto k = phi.cols();
    const auto g = phi.rows();
    t_ = Eigen::MatrixXd::Identity(k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      if (tol[j] == 0.0 && constant_column(phi.col(j)) && phi(0, j) != 0.0) {
        for (Eigen::Index l = 0; l < k; ++l) {
          if (l != j) t_(j, l) = -phi.col(l).mean() / phi(0, j);
        }
        break;
      }
    }
    psi_ = phi * t_;
    Eigen::VectorXd scale = (psi_.colwise().squaredNorm().transpose() / static_cast<double>(g)).cwiseSqrt();
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!(scale[j] > 1e-300)) scale[j] = 1.0;
    }
    t_ = t_ * scale.cwiseInverse().asDiagonal();
    psi_ = psi_ * scale.cwiseInverse().asDiagonal();
    tol_ = tol.cwiseQuotient(scale);

    if ((tol.array() == 0.0).all() && g >= k && k > 0) {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(psi_);
      const Eigen::VectorXd diag = qr.matrixQR().diagonal().cwiseAbs();
      if (diag.minCoeff() > 1e-9 * diag.maxCoeff()) {
        const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        const Eigen::MatrixXd r_inv =
            r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
        // Unit-RMS columns again, so the Hessian is close to the identity for flat weights.
        const double root_g = std::sqrt(static_cast<double>(g));
        psi_ = (qr.householderQ() * Eigen::MatrixXd::Identity(g, k)) * root_g;
        t_ = t_ * r_inv * root_g;
      }
    }
    target_ = t_.transpose() * target;
  }

  Eigen::VectorXd lambda(const Eigen::VectorXd& mu) const { return t_ * mu; }
  const Eigen::VectorXd& tol() const { return tol_; }

  Eigen::VectorXd weights(const Eigen::VectorXd& mu) const {
    Eigen::VectorXd z = psi_ * mu;
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rho_prime(pen_, z[i]);
    return z;
  }

  double smooth(const Eigen::VectorXd& mu) const {
    const Eigen::VectorXd z = psi_ * mu;
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) total += rho(pen_, z[i]);
    return total - mu.dot(target_);
  }

  double penalty(const Eigen::VectorXd& mu) const { return tol_.dot(mu.cwiseAbs()); }
  double objective(const Eigen::VectorXd& mu) const { return smooth(mu) + penalty(mu); }

  Eigen::VectorXd gradient_from_weights(const Eigen::VectorXd& w) const {
    return psi_.transpose() * w - target_;
  }

  Eigen::MatrixXd hessian(const Eigen::VectorXd& mu) const {
    Eigen::VectorXd z = psi_ * mu;
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rho_second(pen_, z[i]);
    return psi_.transpose() * z.asDiagonal() * psi_;
  }

  Eigen::VectorXd prox(const Eigen::VectorXd& v, double step) const {
    Eigen::VectorXd out(v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) out[j] = soft_threshold(v[j], step * tol_[j]);
    return out;
  }

 private:
  Penalty pen_;
  Eigen::MatrixXd psi_;
  Eigen::MatrixXd t_;
  Eigen::VectorXd target_;
  Eigen::VectorXd tol_;
};

struct Progress {
  double objective = 0.0;
  double primal = 0.0;
  double gap = 0.0;
  double max_violation = 0.0;
  double residual = 0.0;
  bool finite = true;
};

// Minimizes the L1-penalized quadratic model around mu by cyclic coordinate descent.
Eigen::VectorXd newton_direction(const Eigen::MatrixXd& hess, const Eigen::VectorXd& grad,
                                 const Eigen::VectorXd& mu, const Eigen::VectorXd& tol) {
  const auto k = mu.size();
  const double ridge = 1e-12 * std::max(1.0, hess.diagonal().maxCoeff());
  if ((tol.array() == 0.0).all()) {
    Eigen::MatrixXd h = hess;
    h.diagonal().array() += ridge;
    return -h.ldlt().solve(grad);
  }
  Eigen::VectorXd u = mu;
  Eigen::VectorXd hd = Eigen::VectorXd::Zero(k);  // hess * (u - mu)
  for (int sweep = 0; sweep < 1000; ++sweep) {
    double change = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double a = hess(j, j) + ridge;
      const double c = grad[j] + hd[j] - hess(j, j) * (u[j] - mu[j]);
      const double next = soft_threshold(a * mu[j] - c, tol[j]) / a;
      const double delta = next - u[j];
      if (delta != 0.0) {
        hd += hess.col(j) * delta;
        u[j] = next;
        change = std::max(change, std::abs(delta) * std::sqrt(a));
      }
    }
    if (change < 1e-15) break;
  }
  return u - mu;
}

}  // namespace

DualSolution solve_dual(const BalancingProblem& prob, const SolverConfig& cfg) {
  prob.validate();
  const Eigen::MatrixXd phi_all = prob.masked_design();
  const auto k_all = phi_all.cols();
  auto column_label = [&](Eigen::Index j) {
    return prob.column_names.empty() ? "column " + std::to_string(j)
                                     : "'" + prob.column_names[static_cast<std::size_t>(j)] + "'";
  };

  DualSolution sol;

  // Columns constant within the mask are collinear with the normalizer; keep
  // one of them (the all-ones column when present) and drop the rest.
  std::vector<Eigen::Index> constant_cols;
  for (Eigen::Index j = 0; j < k_all; ++j) {
    if (constant_column(phi_all.col(j))) constant_cols.push_back(j);
  }
  if (constant_cols.size() > 1) {
    Eigen::Index keep = constant_cols.front();
    for (auto j : constant_cols) {
      if ((phi_all.col(j).array() == 1.0).all()) {
        keep = j;
        break;
      }
    }
    for (auto j : constant_cols) {
      if (j == keep) continue;
      sol.dropped_columns.push_back(j);
      sol.warnings.push_back("dropped degenerate " + column_label(j) +
                             " (zero variance within the weighted group)");
    }
  }
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < k_all; ++j) {
    if (std::find(sol.dropped_columns.begin(), sol.dropped_columns.end(), j) ==
        sol.dropped_columns.end()) {
      active.push_back(j);
    }
  }
  const auto k = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd phi(phi_all.rows(), k);
  Eigen::VectorXd target(k), tol(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    phi.col(a) = phi_all.col(active[static_cast<std::size_t>(a)]);
    target[a] = prob.target[active[static_cast<std::size_t>(a)]];
    tol[a] = prob.tolerances[active[static_cast<std::size_t>(a)]];
  }

  const Reparameterized dual(phi, target, tol, prob.penalty);

  // Gap, feasibility and stationarity are measured in the original units.
  auto assess = [&](const Eigen::VectorXd& mu, const Eigen::VectorXd& w) {
    Progress p;
    p.finite = w.allFinite();
    if (!p.finite) return p;
    p.objective = dual.objective(mu);
    p.primal = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) p.primal += prob.penalty.value(w[i]);
    const Eigen::VectorXd lambda = dual.lambda(mu);
    const Eigen::VectorXd v = phi.transpose() * w - target;
    p.gap = 0.0;
    p.max_violation = 0.0;
    p.residual = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      // Fenchel-Young makes primal + dual collapse to this complementary-slackness sum.
      p.gap += lambda[j] * v[j] + tol[j] * std::abs(lambda[j]);
      p.max_violation = std::max(p.max_violation, std::abs(v[j]) - tol[j]);
      const double r = lambda[j] != 0.0 ? std::abs(v[j] + tol[j] * (lambda[j] > 0.0 ? 1.0 : -1.0))
                                        : std::max(std::abs(v[j]) - tol[j], 0.0);
      p.residual = std::max(p.residual, r);
    }
    return p;
  };
  auto done = [&](const Progress& p) {
    return p.finite && std::abs(p.gap) <= cfg.gap_tol * (std::abs(p.primal) + 1.0) &&
           p.max_violation <= cfg.feas_tol && p.residual <= cfg.residual_tol;
  };

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd w = dual.weights(mu);
  Eigen::VectorXd grad = dual.gradient_from_weights(w);
  Progress prog = assess(mu, w);
  double step = cfg.step_init;
  bool stalled = false;
  bool diverged = false;
  int iter = 0;

  // Accelerated proximal gradient state.
  Eigen::VectorXd y = mu;
  double momentum = 1.0;

  for (; iter < cfg.max_iter; ++iter) {
    if (done(prog)) break;
    if (!prog.finite || !grad.allFinite() || mu.cwiseAbs().maxCoeff() > 1e8) {
      diverged = true;
      break;
    }
    const double f0 = prog.objective;
    bool moved = false;

    if (cfg.acceleration) {
      const Eigen::VectorXd d = newton_direction(dual.hessian(mu), grad, mu, dual.tol());
      const double decrease = grad.dot(d) + dual.penalty(mu + d) - dual.penalty(mu);
      if (d.allFinite() && d.cwiseAbs().maxCoeff() > 0.0) {
        double alpha = 1.0;
        for (int ls = 0; ls < 60; ++ls) {
          const Eigen::VectorXd cand = mu + alpha * d;
          const double f = dual.objective(cand);
          // Near the optimum F is flat to rounding; a full Newton step is then accepted.
          const bool flat = ls == 0 && f <= f0 + 1e-14 * (1.0 + std::abs(f0));
          if (std::isfinite(f) && ((decrease < 0.0 && f <= f0 + 1e-4 * alpha * decrease) || flat)) {
            mu = cand;
            moved = true;
            break;
          }
          alpha *= 0.5;
        }
      }
    }

    if (!moved) {
      // Proximal gradient with backtracking (FISTA momentum when acceleration is off).
      const Eigen::VectorXd base = cfg.acceleration ? mu : y;
      const Eigen::VectorXd gb = dual.gradient_from_weights(dual.weights(base));
      const double sb = dual.smooth(base);
      Eigen::VectorXd cand;
      bool accepted = false;
      for (int ls = 0; ls < 80; ++ls) {
        cand = dual.prox(base - step * gb, step);
        const Eigen::VectorXd diff = cand - base;
        const double sc = dual.smooth(cand);
        if (std::isfinite(sc) &&
            sc <= sb + gb.dot(diff) + diff.squaredNorm() / (2.0 * step) + 1e-15 * std::abs(sb)) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        stalled = true;
        break;
      }
      if (cfg.acceleration) {
        if (dual.objective(cand) > f0 + 1e-14 * (1.0 + std::abs(f0))) {
          stalled = true;
          break;
        }
        mu = cand;
      } else {
        const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        if (dual.objective(cand) > f0) {
          // Adaptive restart: drop momentum and retry from the current iterate.
          y = mu;
          momentum = 1.0;
          continue;
        }
        y = cand + ((momentum - 1.0) / next_momentum) * (cand - mu);
        mu = cand;
        momentum = next_momentum;
        step = std::min(step * 1.2, 1e12);
      }
    }

    w = dual.weights(mu);
    grad = dual.gradient_from_weights(w);
    prog = assess(mu, w);
  }

  if (done(prog) && cfg.acceleration && k > 0) {
    // one extra Newton step; kept only if it tightens feasibility
    const Eigen::VectorXd d = newton_direction(dual.hessian(mu), grad, mu, dual.tol());
    if (d.allFinite()) {
      const Eigen::VectorXd cand = mu + d;
      const Eigen::VectorXd wc = dual.weights(cand);
      const Progress pc = assess(cand, wc);
      if (done(pc) && pc.max_violation < prog.max_violation &&
          pc.objective <= prog.objective + 1e-14 * (1.0 + std::abs(prog.objective))) {
        mu = cand;
        w = wc;
        prog = pc;
      }
    }
  }

  sol.iterations = iter;
  const Eigen::VectorXd lambda_active = dual.lambda(mu);
  sol.lambda = Eigen::VectorXd::Zero(k_all);
  for (Eigen::Index a = 0; a < k; ++a) sol.lambda[active[static_cast<std::size_t>(a)]] = lambda_active[a];
  sol.weights = w;
  sol.primal_objective = primal_objective(prob, sol.weights);
  sol.dual_objective = dual_objective(prob, sol.lambda);
  sol.duality_gap = prog.gap;
  sol.max_violation = prog.max_violation;
  sol.first_order_residual = prog.residual;

  if (done(prog)) {
    sol.status = SolveStatus::converged;
  } else if (diverged || (prog.max_violation > cfg.feas_tol && mu.cwiseAbs().maxCoeff() > 1e4)) {
    sol.status = SolveStatus::infeasible_suspected;
  } else {
    sol.status = SolveStatus::max_iter;
    if (stalled) sol.warnings.push_back("solver stalled at numerical precision");
  }

  if (sol.status != SolveStatus::converged) {
    std::vector<std::pair<double, Eigen::Index>> worst;
    const Eigen::VectorXd viol = phi_all.transpose() * sol.weights - prob.target;
    for (auto j : active) worst.emplace_back(std::abs(viol[j]) - prob.tolerances[j], j);
    std::sort(worst.rbegin(), worst.rend());
    std::ostringstream msg;
    msg << "most violated constraints:";
    for (std::size_t r = 0; r < std::min<std::size_t>(3, worst.size()); ++r) {
      msg << ' ' << column_label(worst[r].second) << " (" << worst[r].first << ")";
    }
    sol.warnings.push_back(msg.str());
  }
  if (prob.penalty.kind != PenaltyKind::entropy && (sol.weights.array() < 0.0).any()) {
    sol.warnings.push_back("recovered weights include negative values");
  }
  return sol;
}

}  // namespace medbal
