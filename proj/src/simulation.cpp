#include "medbal/simulation.hpp"

#include "medbal/baseline_weights.hpp"
#include "medbal/logistic.hpp"
#include "medbal/minimal_weights.hpp"
#include "medbal/parallel.hpp"
#include "medbal/rng.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace medbal {

std::string to_string(SimFamily f) { return f == SimFamily::ts2012 ? "ts2012" : "wc2018"; }

std::string to_string(SimSetting s) {
  switch (s) {
    case SimSetting::A:
      return "A";
    case SimSetting::B:
      return "B";
    case SimSetting::C:
      return "C";
  }
  return "?";
}

SimFamily parse_family(const std::string& s) {
  if (s == "ts" || s == "ts2012") return SimFamily::ts2012;
  if (s == "wc" || s == "wc2018") return SimFamily::wc2018;
  throw std::invalid_argument("unknown simulation family '" + s + "' (expected ts|wc)");
}

SimSetting parse_setting(const std::string& s) {
  if (s == "A" || s == "a") return SimSetting::A;
  if (s == "B" || s == "b") return SimSetting::B;
  if (s == "C" || s == "c") return SimSetting::C;
  throw std::invalid_argument("unknown setting '" + s + "' (expected A|B|C)");
}

std::string to_string(SimMethod m) {
  switch (m) {
    case SimMethod::mw:
      return "mw";
    case SimMethod::mw_tuned:
      return "mw-tuned";
    case SimMethod::eif:
      return "eif";
    case SimMethod::eif_trim:
      return "eif-trim";
    case SimMethod::cbps:
      return "cbps";
    case SimMethod::true_ps:
      return "true-ps";
    case SimMethod::ri:
      return "ri";
  }
  return "?";
}

SimMethod parse_method(const std::string& s) {
  for (auto m : {SimMethod::mw, SimMethod::mw_tuned, SimMethod::eif, SimMethod::eif_trim,
                 SimMethod::cbps, SimMethod::true_ps, SimMethod::ri}) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument("unknown method '" + s +
                              "' (expected mw|mw-tuned|eif|eif-trim|cbps|true-ps|ri)");
}

namespace {

enum Block : std::uint64_t { block_z = 0, block_d = 1, block_m = 2, block_noise = 3 };

double pi_index(SimFamily f, const double* z) {
  return f == SimFamily::ts2012 ? z[0] - 0.5 * z[1] + 0.25 * z[2] + 0.1 * z[3]
                                : -z[0] - 0.1 * z[3];
}

double mediator_index(const double* z, double d) {
  return 0.5 - z[0] + 0.5 * z[1] - 0.9 * z[2] + z[3] - 1.5 * d;
}

std::vector<std::string> names(const char* prefix, int from, int to) {
  std::vector<std::string> out;
  for (int j = from; j <= to; ++j) out.push_back(prefix + std::to_string(j));
  return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

double true_pi1(SimFamily f, const double* z) { return logistic(pi_index(f, z)); }

double true_xi1(SimFamily f, const double* z, double m) {
  const double p1 = true_pi1(f, z);
  const double q1 = logistic(mediator_index(z, 1.0));
  const double q0 = logistic(mediator_index(z, 0.0));
  const double l1 = p1 * (m > 0.5 ? q1 : 1.0 - q1);
  const double l0 = (1.0 - p1) * (m > 0.5 ? q0 : 1.0 - q0);
  return l1 / (l1 + l0);
}

SimDraw draw(const DGP& dgp, std::uint64_t seed, std::uint64_t rep) {
  const Eigen::Index n = dgp.n;
  if (n < 4) throw std::invalid_argument("simulation sample size must be at least 4");
  const bool ts = dgp.family == SimFamily::ts2012;
  const int nz = ts ? 4 : 10;

  auto eng_z = make_stream(seed, {rep, block_z});
  auto eng_d = make_stream(seed, {rep, block_d});
  auto eng_m = make_stream(seed, {rep, block_m});
  auto eng_e = make_stream(seed, {rep, block_noise});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::MatrixXd z(n, 10);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < 10; ++j) z(i, j) = normal(eng_z);
  }

  SimDraw out;
  Dataset& data = out.data;
  data.outcome_name = "Y";
  data.treatment_name = "D";
  data.mediator_names = {"M"};
  data.covariate_names = concat(names("Z", 1, nz), names("X", 1, ts ? 4 : 10));
  data.y.resize(n);
  data.d.resize(n);
  data.m.resize(n, 1);
  data.x.resize(n, static_cast<Eigen::Index>(data.covariate_names.size()));
  out.pi1_true.resize(n);
  out.xi1_true.resize(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    double zi[10];
    for (int j = 0; j < 10; ++j) zi[j] = z(i, j);
    const double p1 = true_pi1(dgp.family, zi);
    const double d = unif(eng_d) < p1 ? 1.0 : 0.0;
    const double m = unif(eng_m) < logistic(mediator_index(zi, d)) ? 1.0 : 0.0;
    const double eps = normal(eng_e);
    const double lin = 27.4 * zi[0] + 13.7 * zi[1] + 13.7 * zi[2] + 13.7 * zi[3];
    data.y[i] = ts ? 210.0 + lin + m + d + eps : 210.0 + (1.5 * d + m - 0.5) * lin + eps;
    data.d[i] = d;
    data.m(i, 0) = m;
    out.pi1_true[i] = p1;
    out.xi1_true[i] = true_xi1(dgp.family, zi, m);

    Eigen::Index col = 0;
    for (int j = 0; j < nz; ++j) data.x(i, col++) = zi[j];
    data.x(i, col++) = std::exp(zi[0] / 2.0);
    data.x(i, col++) = zi[1] / (1.0 + std::exp(zi[0])) + (ts ? 10.0 : 0.0);
    data.x(i, col++) = std::pow(zi[0] * zi[2] / 25.0 + 0.6, 3);
    data.x(i, col++) = ts ? std::pow(zi[1] * zi[3] + 20.0, 2) : std::pow(zi[1] + zi[3] + 20.0, 2);
    if (!ts) {
      for (int j = 4; j < 10; ++j) data.x(i, col++) = zi[j];
    }
  }
  data.validate();
  return out;
}

SettingConfig SettingConfig::make(SimFamily family, SimSetting setting) {
  const auto z = names("Z", 1, 4);
  const bool ts = family == SimFamily::ts2012;
  const auto x = names("X", 1, ts ? 4 : 10);
  const std::vector<std::string> m = {"M"};
  SettingConfig cfg;
  cfg.id = setting;
  switch (setting) {
    case SimSetting::A:
      cfg.c_spec = BasisSpec::linear(z);
      cfg.b_spec = BasisSpec::linear(concat(m, z));
      cfg.outcome_c_spec = cfg.c_spec;
      cfg.outcome_b_spec = cfg.b_spec;
      break;
    case SimSetting::B:
      cfg.c_spec = BasisSpec::linear(concat(x, z));
      cfg.b_spec = BasisSpec::linear(concat(m, concat(x, z)));
      if (!ts) {
        for (const auto& zj : z) {
          cfg.b_spec.terms.push_back(Term::interaction({"M", zj}));
        }
      }
      cfg.outcome_c_spec = BasisSpec::linear(x);
      cfg.outcome_b_spec = BasisSpec::linear(concat(m, x));
      break;
    case SimSetting::C:
      if (!ts) throw std::invalid_argument("setting C is defined for the ts family only");
      cfg.c_spec = BasisSpec::linear(z);
      cfg.b_spec = BasisSpec::linear(concat(m, z));
      cfg.outcome_c_spec = BasisSpec::linear(x);
      cfg.outcome_b_spec = BasisSpec::linear(concat(m, x));
      break;
  }
  return cfg;
}

SimBases build_sim_bases(const SettingConfig& cfg, const Dataset& data) {
  return {build_basis(data, cfg.c_spec, BasisScope::covariates),
          build_basis(data, cfg.b_spec, BasisScope::covariates_and_mediators),
          build_basis(data, cfg.outcome_c_spec, BasisScope::covariates),
          build_basis(data, cfg.outcome_b_spec, BasisScope::covariates_and_mediators)};
}

const MCCell* MCResult::find(SimMethod m, EstimatorFamily f, Estimand e) const {
  for (const auto& c : cells) {
    if (c.method == m && c.family == f && c.estimand == e) return &c;
  }
  return nullptr;
}

ReplicationOutcome run_replication(const DGP& dgp, const SettingConfig& setting,
                                   const MCOptions& opts, std::uint64_t rep) {
  ReplicationOutcome out;
  out.rep = rep;
  const SimDraw sim = draw(dgp, opts.seed, rep);
  const Dataset& data = sim.data;
  const SimBases bases = build_sim_bases(setting, data);
  std::optional<NuisanceFit> outcome_nuis;
  auto nuisances = [&]() -> const NuisanceFit& {
    if (!outcome_nuis) outcome_nuis = fit_nuisances(data, bases.outcome_b, bases.outcome_c);
    return *outcome_nuis;
  };
  TwoStepOptions two_step;
  two_step.solver = opts.solver;

  auto record = [&](SimMethod method, const EstimateReport& rep_) {
    for (auto e : {Estimand::nde0, Estimand::nde1}) {
      out.estimates.push_back({method, rep_.family, e, rep_[e].estimate, rep_[e].se});
    }
  };

  for (auto method : opts.methods) {
    try {
      if (method == SimMethod::ri) {
        const NuisanceFit ri = fit_nuisances(data, bases.b, bases.c);
        record(method, build_report(data, WeightPair{}, ri, EstimatorFamily::regression_imputation,
                                    opts.level));
        continue;
      }
      WeightPair pair;
      switch (method) {
        case SimMethod::mw:
          pair.standard = fit_two_step(data, bases.c, bases.b, opts.eps, opts.delta, opts.penalty,
                                       Orientation::standard, two_step);
          pair.exchanged = fit_two_step(data, bases.c, bases.b, opts.eps, opts.delta, opts.penalty,
                                        Orientation::exchanged, two_step);
          break;
        case SimMethod::mw_tuned: {
          for (auto o : {Orientation::standard, Orientation::exchanged}) {
            TuningOptions t = opts.tuning;
            t.orientation = o;
            t.seed = derive_seed(opts.tuning.seed, {rep, static_cast<std::uint64_t>(o)});
            t.workers = 1;
            t.solver = opts.solver;
            const TuningResult tr = tune_tolerances(data, bases.c, bases.b, opts.penalty, t);
            out.tuned.emplace_back(tr.eps_star, tr.delta_star);
            WeightSet ws = fit_two_step(data, bases.c, bases.b, tr.eps_star, tr.delta_star,
                                        opts.penalty, o, two_step);
            ws.method = "mw-tuned";
            (o == Orientation::standard ? pair.standard : pair.exchanged) = std::move(ws);
          }
          break;
        }
        case SimMethod::eif:
        case SimMethod::eif_trim: {
          const auto [pi, xi] = fit_propensities(data, bases.c, bases.b);
          std::optional<TrimInterval> trim;
          if (method == SimMethod::eif_trim) trim = TrimInterval{};
          const std::string label = to_string(method);
          pair.standard = eif_weights(data, pi.fitted, xi.fitted, Orientation::standard, trim, label);
          pair.exchanged =
              eif_weights(data, pi.fitted, xi.fitted, Orientation::exchanged, trim, label);
          break;
        }
        case SimMethod::cbps:
          pair.standard = cbps_weights(data, bases.c, bases.b, Orientation::standard);
          pair.exchanged = cbps_weights(data, bases.c, bases.b, Orientation::exchanged);
          break;
        case SimMethod::true_ps:
          pair.standard = true_ps_weights(data, sim.pi1_true, sim.xi1_true, Orientation::standard);
          pair.exchanged = true_ps_weights(data, sim.pi1_true, sim.xi1_true, Orientation::exchanged);
          break;
        case SimMethod::ri:
          break;
      }
      const NuisanceFit& nf = nuisances();
      record(method, build_report(data, pair, nf, EstimatorFamily::eif, opts.level));
      record(method, build_report(data, pair, nf, EstimatorFamily::ipw, opts.level));
    } catch (const std::exception& e) {
      out.failures.push_back(to_string(method) + ": " + e.what());
    }
  }
  return out;
}

MCResult run_mc(const DGP& dgp, const SettingConfig& setting, const MCOptions& opts) {
  if (opts.reps < 1) throw std::invalid_argument("reps must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  MCResult res;
  res.family = dgp.family;
  res.setting = setting.id;
  res.n = dgp.n;
  res.reps = opts.reps;
  res.seed = opts.seed;
  res.replications.resize(static_cast<std::size_t>(opts.reps));
  parallel_for(res.replications.size(), opts.workers, [&](std::size_t r) {
    try {
      res.replications[r] = run_replication(dgp, setting, opts, r);
    } catch (const std::exception& e) {
      res.replications[r].rep = r;
      res.replications[r].failures.push_back(std::string("replication: ") + e.what());
    }
  });

  const double truth = dgp.true_nde();
  const double z = [&] {
    const Interval ci = confidence_interval(0.0, 1.0, opts.level);
    return ci.high;
  }();
  for (const auto& rep : res.replications) {
    for (const auto& f : rep.failures) {
      res.failures.push_back("rep " + std::to_string(rep.rep) + ": " + f);
    }
    for (const auto& est : rep.estimates) {
      MCCell* cell = nullptr;
      for (auto& c : res.cells) {
        if (c.method == est.method && c.family == est.family && c.estimand == est.estimand) {
          cell = &c;
        }
      }
      if (!cell) {
        res.cells.push_back({});
        cell = &res.cells.back();
        cell->method = est.method;
        cell->family = est.family;
        cell->estimand = est.estimand;
        cell->truth = truth;
      }
      ++cell->reps;
      cell->mean += est.estimate;
      cell->mse += (est.estimate - truth) * (est.estimate - truth);
      if (est.se) {
        const bool covered = std::abs(est.estimate - truth) <= z * *est.se;
        cell->coverage = cell->coverage.value_or(0.0) + (covered ? 1.0 : 0.0);
      }
    }
  }
  for (auto& cell : res.cells) {
    const double r = cell.reps;
    cell.mean /= r;
    cell.mse /= r;
    cell.bias = cell.mean - truth;
    double ss = 0.0;
    for (const auto& rep : res.replications) {
      for (const auto& est : rep.estimates) {
        if (est.method == cell.method && est.family == cell.family && est.estimand == cell.estimand) {
          ss += (est.estimate - cell.mean) * (est.estimate - cell.mean);
        }
      }
    }
    cell.variance = cell.reps > 1 ? ss / (r - 1.0) : 0.0;
    if (cell.coverage) *cell.coverage /= r;
  }
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

void write_mc_table(const MCResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.precision(10);
  out << "family,setting,n,method,estimator,estimand,reps,truth,mean,abs_bias,variance,mse,coverage\n";
  for (const auto& c : res.cells) {
    out << to_string(res.family) << ',' << to_string(res.setting) << ',' << res.n << ','
        << to_string(c.method) << ',' << to_string(c.family) << ',' << to_string(c.estimand) << ','
        << c.reps << ',' << c.truth << ',' << c.mean << ',' << std::abs(c.bias) << ','
        << c.variance << ',' << c.mse << ',';
    if (c.coverage) {
      out << *c.coverage;
    } else {
      out << "NA";
    }
    out << '\n';
  }
}

}  // namespace medbal
