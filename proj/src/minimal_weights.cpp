#include "medbal/minimal_weights.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace medbal {

std::string to_string(Orientation o) {
  return o == Orientation::standard ? "standard" : "exchanged";
}

std::vector<bool> group_mask(const Dataset& data, int treatment_level) {
  std::vector<bool> mask(static_cast<std::size_t>(data.n()));
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    mask[static_cast<std::size_t>(i)] = static_cast<int>(data.d[i]) == treatment_level;
  }
  return mask;
}

int step1_level(Orientation o) { return o == Orientation::standard ? 0 : 1; }

std::vector<bool> WeightSet::step1_mask(const Dataset& data) const {
  return group_mask(data, step1_level(orientation));
}

std::vector<bool> WeightSet::step2_mask(const Dataset& data) const {
  return group_mask(data, 1 - step1_level(orientation));
}

Eigen::VectorXd broadcast_tolerance(const DesignMatrix& basis, double tol) {
  if (tol < 0.0) throw std::invalid_argument("tolerance must be nonnegative");
  Eigen::VectorXd out = Eigen::VectorXd::Constant(basis.cols(), tol);
  if (auto c = basis.constant_column()) out[*c] = 0.0;
  return out;
}

Eigen::VectorXd scatter(const std::vector<bool>& mask, const Eigen::VectorXd& masked) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mask.size()));
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out[static_cast<Eigen::Index>(i)] = masked[r++];
  }
  return out;
}

namespace {

Penalty group_penalty(const Penalty& penalty, const std::vector<bool>& mask) {
  const auto g = std::count(mask.begin(), mask.end(), true);
  return penalty.with_reference(static_cast<int>(g));
}

void check_widths(const DesignMatrix& basis, const Eigen::VectorXd& tol, const char* what) {
  if (tol.size() != basis.cols()) {
    std::ostringstream msg;
    msg << what << " has " << tol.size() << " entries but the basis has " << basis.cols()
        << " columns";
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

DualSolution fit_step1(const Dataset& data, const DesignMatrix& c_basis, const Eigen::VectorXd& eps,
                       const Penalty& penalty, Orientation o, const SolverConfig& cfg) {
  check_widths(c_basis, eps, "eps");
  if (c_basis.rows() != data.n()) throw std::invalid_argument("c basis rows differ from data");
  BalancingProblem prob;
  prob.mask = group_mask(data, step1_level(o));
  prob.design = c_basis.values;
  prob.column_names = c_basis.column_names;
  prob.target = c_basis.values.colwise().mean().transpose();
  prob.tolerances = eps;
  prob.penalty = group_penalty(penalty, prob.mask);
  return solve_dual(prob, cfg);
}

DualSolution fit_step2(const Dataset& data, const DesignMatrix& b_basis, const Eigen::VectorXd& w1,
                       const Eigen::VectorXd& delta, const Penalty& penalty, Orientation o,
                       const SolverConfig& cfg) {
  check_widths(b_basis, delta, "delta");
  if (b_basis.rows() != data.n() || w1.size() != data.n()) {
    throw std::invalid_argument("b basis / step-1 weights rows differ from data");
  }
  BalancingProblem prob;
  prob.mask = group_mask(data, 1 - step1_level(o));
  prob.design = b_basis.values;
  prob.column_names = b_basis.column_names;
  prob.target = b_basis.values.transpose() * w1;
  prob.tolerances = delta;
  prob.penalty = group_penalty(penalty, prob.mask);
  return solve_dual(prob, cfg);
}

WeightSet fit_two_step(const Dataset& data, const DesignMatrix& c_basis,
                       const DesignMatrix& b_basis, const Eigen::VectorXd& eps,
                       const Eigen::VectorXd& delta, const Penalty& penalty, Orientation o,
                       const TwoStepOptions& opts) {
  data.validate();
  WeightSet ws;
  ws.orientation = o;
  ws.method = "mw";
  ws.eps = eps;
  ws.delta = delta;

  auto fail = [&](int step, const DualSolution& sol) {
    std::ostringstream msg;
    msg << "step " << step << " (" << to_string(o) << "): solver " << to_string(sol.status)
        << " after " << sol.iterations << " iterations, max violation " << sol.max_violation;
    if (!sol.warnings.empty()) msg << "; " << sol.warnings.back();
    throw NumericalError(msg.str());
  };

  ws.step1 = fit_step1(data, c_basis, eps, penalty, o, opts.solver);
  if (!ws.step1->converged() && opts.require_convergence) fail(1, *ws.step1);
  for (const auto& w : ws.step1->warnings) ws.warnings.push_back("step 1: " + w);
  ws.w1 = scatter(group_mask(data, step1_level(o)), ws.step1->weights);

  ws.step2 = fit_step2(data, b_basis, ws.w1, delta, penalty, o, opts.solver);
  if (!ws.step2->converged() && opts.require_convergence) fail(2, *ws.step2);
  for (const auto& w : ws.step2->warnings) ws.warnings.push_back("step 2: " + w);
  ws.w2 = scatter(group_mask(data, 1 - step1_level(o)), ws.step2->weights);
  return ws;
}

WeightSet fit_two_step(const Dataset& data, const DesignMatrix& c_basis,
                       const DesignMatrix& b_basis, double eps, double delta,
                       const Penalty& penalty, Orientation o, const TwoStepOptions& opts) {
  return fit_two_step(data, c_basis, b_basis, broadcast_tolerance(c_basis, eps),
                      broadcast_tolerance(b_basis, delta), penalty, o, opts);
}

void write_weights_csv(const Dataset& data, const WeightSet& ws, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "row_id,group,step,weight\n";
  const auto m1 = ws.step1_mask(data);
  const auto m2 = ws.step2_mask(data);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const char* group = data.d[i] > 0.5 ? "treated" : "control";
    if (m1[k]) out << i + 1 << ',' << group << ",1," << ws.w1[i] << '\n';
    if (m2[k]) out << i + 1 << ',' << group << ",2," << ws.w2[i] << '\n';
  }
}

}  // namespace medbal
