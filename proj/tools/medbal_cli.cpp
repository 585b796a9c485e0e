#include "medbal/baseline_weights.hpp"
#include "medbal/diagnostics.hpp"
#include "medbal/estimators.hpp"
#include "medbal/inference.hpp"
#include "medbal/minimal_weights.hpp"
#include "medbal/report.hpp"
#include "medbal/simulation.hpp"
#include "medbal/tuning.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

using nlohmann::json;
using namespace medbal;

namespace {

struct RunConfig {
  std::string subcommand;
  // data
  std::string data;
  std::string outcome;
  std::string treatment;
  std::vector<std::string> mediators;
  std::vector<std::string> covariates;
  std::string treatment_reference;
  int degree = 1;
  int interactions = 1;
  bool standardize = true;
  // weighting
  std::string method = "mw";
  std::vector<std::string> methods = {"mw"};
  std::string penalty = "entropy";
  double eps = 0.0;
  double delta = 0.0;
  bool tune = false;
  int grid = 100;
  int boot_reps = 50;
  double level = 0.95;
  std::uint64_t seed = 1;
  int workers = 1;
  // simulation
  std::string family = "ts";
  std::string setting = "A";
  long n = 500;
  int reps = 200;
  // outputs
  std::string out;
  std::string weights_out;
  std::string balance_out;
  std::string table_out;
  // resolved options as a config file that re-runs this invocation
  std::string config_file;
};

json config_json(const RunConfig& c) {
  json j;
  j["subcommand"] = c.subcommand;
  if (c.subcommand == "simulate") {
    j["family"] = c.family;
    j["setting"] = c.setting;
    j["n"] = c.n;
    j["reps"] = c.reps;
    j["methods"] = c.methods;
  } else {
    j["data"] = c.data;
    j["outcome"] = c.outcome;
    j["treatment"] = c.treatment;
    j["mediators"] = c.mediators;
    j["covariates"] = c.covariates;
    j["treatment_reference"] = c.treatment_reference.empty() ? json(nullptr) : json(c.treatment_reference);
    j["degree"] = c.degree;
    j["interactions"] = c.interactions;
    j["standardize"] = c.standardize;
    if (c.subcommand == "diagnose") j["methods"] = c.methods;
    else j["method"] = c.method;
    j["tune"] = c.tune;
  }
  j["penalty"] = c.penalty;
  j["eps"] = c.eps;
  j["delta"] = c.delta;
  j["grid"] = c.grid;
  j["boot_reps"] = c.boot_reps;
  j["level"] = c.level;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  return j;
}

// TOML section for the subcommand; output paths are left out
std::string config_toml(const RunConfig& c) {
  const json j = config_json(c);
  std::string out = "[" + c.subcommand + "]\n";
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "subcommand" || it.value().is_null()) continue;
    std::string key = it.key();
    std::replace(key.begin(), key.end(), '_', '-');
    out += key + " = " + it.value().dump() + "\n";
  }
  return out;
}

// exit 1
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void add_data_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--data", c.data, "input CSV")->required();
  sub->add_option("--outcome", c.outcome, "outcome column")->required();
  sub->add_option("--treatment", c.treatment, "binary treatment column")->required();
  sub->add_option("--mediators", c.mediators, "mediator columns (comma separated)")
      ->required()
      ->delimiter(',');
  sub->add_option("--covariates", c.covariates, "covariate columns (comma separated)")->delimiter(',');
  sub->add_option("--treatment-reference", c.treatment_reference,
                  "level coded as control when the treatment column is text");
  sub->add_option("--degree", c.degree, "polynomial degree of covariate terms")
      ->check(CLI::Range(1, 6));
  sub->add_option("--interactions", c.interactions, "highest interaction order (1 = none)")
      ->check(CLI::Range(1, 3));
  sub->add_option("--standardize", c.standardize, "standardize raw columns before expansion");
  sub->add_option("--penalty", c.penalty, "dispersion penalty")
      ->check(CLI::IsMember({"entropy", "quadratic"}));
  sub->add_option("--eps", c.eps, "step-1 tolerance")->check(CLI::NonNegativeNumber);
  sub->add_option("--delta", c.delta, "step-2 tolerance")->check(CLI::NonNegativeNumber);
  sub->add_flag("--tune", c.tune, "select tolerances by bootstrap");
  sub->add_option("--grid", c.grid, "tuning grid size")->check(CLI::PositiveNumber);
  sub->add_option("--boot-reps", c.boot_reps, "bootstrap replicates per candidate")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "RNG seed");
  sub->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "JSON report path (stdout when omitted)");
}

const std::vector<std::string> kWeightMethods = {"mw", "eif", "eif-trim", "cbps", "true-ps"};

struct Inputs {
  Dataset data;
  DesignMatrix c;
  DesignMatrix b;
};

Inputs load_inputs(const RunConfig& cfg) {
  ColumnRoles roles;
  roles.outcome = cfg.outcome;
  roles.treatment = cfg.treatment;
  roles.mediators = cfg.mediators;
  roles.covariates = cfg.covariates;
  if (!cfg.treatment_reference.empty()) roles.reference_level = cfg.treatment_reference;
  Inputs in;
  in.data = load_csv(cfg.data, roles);
  BasisSpec c_spec = polynomial_basis(in.data, cfg.covariates, cfg.degree, cfg.interactions);
  c_spec.standardize = cfg.standardize;
  BasisSpec b_spec = c_spec;
  std::vector<Term> terms;
  for (const auto& m : cfg.mediators) terms.push_back(Term::raw(m));
  terms.insert(terms.end(), c_spec.terms.begin(), c_spec.terms.end());
  b_spec.terms = terms;
  in.c = build_basis(in.data, c_spec, BasisScope::covariates);
  in.b = build_basis(in.data, b_spec, BasisScope::covariates_and_mediators);
  return in;
}

Penalty penalty_of(const RunConfig& cfg) { return parse_penalty(cfg.penalty); }

TuningOptions tuning_options(const RunConfig& cfg, Orientation o) {
  TuningOptions t;
  t.grid_size = cfg.grid;
  t.bootstrap_reps = cfg.boot_reps;
  t.seed = cfg.seed;
  t.workers = cfg.workers;
  t.orientation = o;
  return t;
}

struct Weighting {
  WeightPair pair;
  std::vector<TuningResult> tuning;
  json extra = json::object();
};

Weighting compute_weights(const RunConfig& cfg, const Inputs& in, const std::string& method) {
  Weighting out;
  const Penalty pen = penalty_of(cfg);
  auto both = [&](auto&& fit) {
    out.pair.standard = fit(Orientation::standard);
    out.pair.exchanged = fit(Orientation::exchanged);
  };
  if (method == "mw") {
    both([&](Orientation o) {
      double eps = cfg.eps, delta = cfg.delta;
      if (cfg.tune) {
        TuningResult t = tune_tolerances(in.data, in.c, in.b, pen, tuning_options(cfg, o));
        eps = t.eps_star;
        delta = t.delta_star;
        out.tuning.push_back(std::move(t));
      }
      return fit_two_step(in.data, in.c, in.b, eps, delta, pen, o);
    });
  } else if (method == "eif" || method == "eif-trim") {
    const auto [pi, xi] = fit_propensities(in.data, in.c, in.b);
    out.extra["propensity_warnings"] = pi.warnings;
    out.extra["mediator_propensity_warnings"] = xi.warnings;
    std::optional<TrimInterval> trim;
    if (method == "eif-trim") trim = TrimInterval{};
    both([&](Orientation o) { return eif_weights(in.data, pi.fitted, xi.fitted, o, trim, method); });
  } else if (method == "cbps") {
    both([&](Orientation o) { return cbps_weights(in.data, in.c, in.b, o); });
  } else if (method == "true-ps") {
    throw UsageError("method true-ps needs known propensities and is only available in simulate");
  } else {
    throw UsageError("unknown method '" + method + "'");
  }
  return out;
}

json weighting_json(const Weighting& w) {
  json j;
  j["standard"] = to_json(w.pair.standard);
  j["exchanged"] = to_json(w.pair.exchanged);
  if (!w.tuning.empty()) {
    j["tuning"] = json::array();
    for (const auto& t : w.tuning) j["tuning"].push_back(to_json(t));
  }
  for (auto it = w.extra.begin(); it != w.extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

json data_json(const Inputs& in) {
  json j;
  j["n"] = in.data.n();
  j["treated"] = in.data.treated_count();
  j["control"] = in.data.control_count();
  j["c_columns"] = in.c.column_names;
  j["b_columns"] = in.b.column_names;
  return j;
}

std::vector<std::string> collect_warnings(const Weighting& w, const NuisanceFit* nf) {
  std::vector<std::string> out;
  for (const WeightSet* ws : {&w.pair.standard, &w.pair.exchanged}) {
    for (const auto& s : ws->warnings) out.push_back(to_string(ws->orientation) + ": " + s);
  }
  for (const auto& t : w.tuning) {
    for (const auto& s : t.notes) out.push_back("tuning " + to_string(t.orientation) + ": " + s);
  }
  if (nf) out.insert(out.end(), nf->warnings.begin(), nf->warnings.end());
  return out;
}

void print_estimates(const EstimateReport& rep) {
  std::cout << to_string(rep.family) << " (" << rep.method << ")\n";
  for (const auto& row : rep.rows) {
    std::cout << "  " << to_string(row.estimand) << "  " << row.estimate;
    if (row.se) std::cout << "  se " << *row.se << "  p " << *row.p;
    std::cout << "\n";
  }
}

json run_estimate(const RunConfig& cfg, bool quiet) {
  const Inputs in = load_inputs(cfg);
  const Weighting w = compute_weights(cfg, in, cfg.method);
  const NuisanceFit nf = fit_nuisances(in.data, in.b, in.c);
  json j;
  j["data"] = data_json(in);
  j["weights"] = weighting_json(w);
  j["estimates"] = json::object();
  for (auto fam : {EstimatorFamily::eif, EstimatorFamily::ipw, EstimatorFamily::regression_imputation}) {
    EstimateReport rep = build_report(in.data, w.pair, nf, fam, cfg.level);
    rep.method = fam == EstimatorFamily::regression_imputation ? "ri" : cfg.method;
    if (!quiet) print_estimates(rep);
    j["estimates"][to_string(fam)] = to_json(rep);
  }
  j["balance"] = to_json(tasmd(in.data, w.pair.standard, in.c, in.b));
  j["warnings"] = collect_warnings(w, &nf);
  if (!cfg.weights_out.empty()) write_weights_csv(in.data, w.pair.standard, cfg.weights_out);
  return j;
}

json run_weights(const RunConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const Weighting w = compute_weights(cfg, in, cfg.method);
  if (!cfg.weights_out.empty()) {
    write_weights_csv(in.data, w.pair.standard, cfg.weights_out);
    const auto dot = cfg.weights_out.rfind('.');
    const std::string stem = dot == std::string::npos ? cfg.weights_out : cfg.weights_out.substr(0, dot);
    write_weights_csv(in.data, w.pair.exchanged, stem + "_exchanged.csv");
  }
  json j;
  j["data"] = data_json(in);
  j["weights"] = weighting_json(w);
  j["warnings"] = collect_warnings(w, nullptr);
  return j;
}

json run_tune(const RunConfig& cfg, bool quiet) {
  const Inputs in = load_inputs(cfg);
  const Penalty pen = penalty_of(cfg);
  json j;
  j["data"] = data_json(in);
  j["tuning"] = json::array();
  for (auto o : {Orientation::standard, Orientation::exchanged}) {
    const TuningResult t = tune_tolerances(in.data, in.c, in.b, pen, tuning_options(cfg, o));
    if (!quiet) {
      std::cout << to_string(o) << ": eps* " << t.eps_star << "  delta* " << t.delta_star << "\n";
    }
    j["tuning"].push_back(to_json(t));
  }
  return j;
}

json run_diagnose(const RunConfig& cfg, bool quiet) {
  const Inputs in = load_inputs(cfg);
  std::vector<BalanceTable> tables;
  json j;
  j["data"] = data_json(in);
  j["balance"] = json::array();
  j["weights"] = json::object();
  std::vector<std::string> warnings;
  for (const auto& method : cfg.methods) {
    const Weighting w = compute_weights(cfg, in, method);
    BalanceTable t = tasmd(in.data, w.pair.standard, in.c, in.b);
    t.method = method;
    if (!quiet) std::cout << method << ": max TASMD " << t.max_value() << "\n";
    j["balance"].push_back(to_json(t));
    j["weights"][method] = weighting_json(w);
    for (const auto& s : collect_warnings(w, nullptr)) warnings.push_back(method + " " + s);
    tables.push_back(std::move(t));
  }
  j["warnings"] = warnings;
  if (!cfg.balance_out.empty()) write_balance_csv(tables, cfg.balance_out);
  return j;
}

json run_simulate(const RunConfig& cfg, bool quiet) {
  const DGP dgp{parse_family(cfg.family), static_cast<Eigen::Index>(cfg.n)};
  const SettingConfig setting = SettingConfig::make(dgp.family, parse_setting(cfg.setting));
  MCOptions opts;
  opts.reps = cfg.reps;
  opts.seed = cfg.seed;
  opts.workers = cfg.workers;
  opts.methods.clear();
  for (const auto& m : cfg.methods) opts.methods.push_back(parse_method(m));
  opts.penalty = penalty_of(cfg);
  opts.eps = cfg.eps;
  opts.delta = cfg.delta;
  opts.level = cfg.level;
  opts.tuning.grid_size = cfg.grid;
  opts.tuning.bootstrap_reps = cfg.boot_reps;
  opts.tuning.seed = cfg.seed;
  const MCResult res = run_mc(dgp, setting, opts);
  if (!cfg.table_out.empty()) write_mc_table(res, cfg.table_out);
  if (!quiet) {
    for (const auto& c : res.cells) {
      std::cout << to_string(c.method) << " " << to_string(c.family) << " " << to_string(c.estimand)
                << "  bias " << c.bias << "  var " << c.variance << "  mse " << c.mse << "\n";
    }
  }
  json j;
  j["simulation"] = to_json(res);
  j["warnings"] = res.failures;
  return j;
}

void write_report(const RunConfig& cfg, const json& report) {
  const std::string text = report.dump(2) + "\n";
  if (cfg.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(cfg.out, std::ios::binary);
  if (!f) throw DataError("cannot write report to '" + cfg.out + "'");
  f << text;
}

json envelope(const RunConfig& cfg) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["versions"] = version_info();
  j["config"] = config_json(cfg);
  j["config_file"] = cfg.config_file;
  j["seed"] = cfg.seed;
  return j;
}

int fail(const RunConfig& cfg, int code, const std::string& kind, const std::string& message) {
  std::cerr << "medbal: " << kind << ": " << message << "\n";
  if (!cfg.out.empty()) {
    json j = envelope(cfg);
    j["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
    try {
      write_report(cfg, j);
    } catch (const std::exception&) {
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Two-step minimal-dispersion balancing weights for causal mediation"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "TOML config file; flags given on the command line take precedence");
  app.require_subcommand(1);

  auto* estimate = app.add_subcommand("estimate", "weights, nuisances, estimates and inference");
  auto* weights = app.add_subcommand("weights", "fit weights and export them");
  auto* tune = app.add_subcommand("tune", "bootstrap tolerance selection");
  auto* diagnose = app.add_subcommand("diagnose", "TASMD balance diagnostics");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study");

  for (auto* sub : {estimate, weights, tune, diagnose}) add_data_options(sub, cfg);
  for (auto* sub : {estimate, weights}) {
    sub->add_option("--method", cfg.method, "weighting scheme")->check(CLI::IsMember(kWeightMethods));
    sub->add_option("--weights-out", cfg.weights_out, "long-format weights CSV");
  }
  estimate->add_option("--level", cfg.level, "confidence level")->check(CLI::Range(0.5, 0.9999));
  diagnose->add_option("--methods", cfg.methods, "weighting schemes (comma separated)")
      ->delimiter(',')
      ->check(CLI::IsMember(kWeightMethods));
  diagnose->add_option("--balance-out", cfg.balance_out, "TASMD CSV");

  simulate->add_option("--family", cfg.family, "ts|wc")->check(CLI::IsMember({"ts", "wc", "ts2012", "wc2018"}));
  simulate->add_option("--setting", cfg.setting, "A|B|C")->check(CLI::IsMember({"A", "B", "C"}));
  simulate->add_option("--n", cfg.n, "sample size")->check(CLI::Range(4L, 100000000L));
  simulate->add_option("--reps", cfg.reps, "replications")->check(CLI::PositiveNumber);
  simulate->add_option("--methods", cfg.methods, "mw|mw-tuned|eif|eif-trim|cbps|true-ps|ri")
      ->delimiter(',')
      ->check(CLI::IsMember({"mw", "mw-tuned", "eif", "eif-trim", "cbps", "true-ps", "ri"}));
  simulate->add_option("--penalty", cfg.penalty, "dispersion penalty")
      ->check(CLI::IsMember({"entropy", "quadratic"}));
  simulate->add_option("--eps", cfg.eps, "step-1 tolerance")->check(CLI::NonNegativeNumber);
  simulate->add_option("--delta", cfg.delta, "step-2 tolerance")->check(CLI::NonNegativeNumber);
  simulate->add_option("--grid", cfg.grid, "tuning grid size for mw-tuned")->check(CLI::PositiveNumber);
  simulate->add_option("--boot-reps", cfg.boot_reps, "bootstrap replicates for mw-tuned")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--level", cfg.level, "confidence level")->check(CLI::Range(0.5, 0.9999));
  simulate->add_option("--seed", cfg.seed, "RNG seed");
  simulate->add_option("--workers", cfg.workers, "worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--out", cfg.out, "JSON report path (stdout when omitted)");
  simulate->add_option("--table-out", cfg.table_out, "summary table CSV");

  // the config file belongs to the root app; accept it after the subcommand too
  std::vector<char*> args{argv[0]};
  std::vector<char*> rest;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) {
      args.push_back(argv[i]);
      args.push_back(argv[++i]);
    } else if (a.rfind("--config=", 0) == 0) {
      args.push_back(argv[i]);
    } else {
      rest.push_back(argv[i]);
    }
  }
  args.insert(args.end(), rest.begin(), rest.end());

  try {
    app.parse(static_cast<int>(args.size()), args.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (auto* sub : app.get_subcommands()) cfg.subcommand = sub->get_name();
  cfg.config_file = config_toml(cfg);
  const bool quiet = cfg.out.empty();

  try {
    json report = envelope(cfg);
    if (cfg.subcommand == "estimate") report.update(run_estimate(cfg, quiet));
    else if (cfg.subcommand == "weights") report.update(run_weights(cfg));
    else if (cfg.subcommand == "tune") report.update(run_tune(cfg, quiet));
    else if (cfg.subcommand == "diagnose") report.update(run_diagnose(cfg, quiet));
    else report.update(run_simulate(cfg, quiet));
    write_report(cfg, report);
  } catch (const UsageError& e) {
    return fail(cfg, 1, "usage", e.what());
  } catch (const DataError& e) {
    return fail(cfg, 1, "data", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(cfg, 1, "usage", e.what());
  } catch (const NumericalError& e) {
    return fail(cfg, 2, "numerical", e.what());
  } catch (const std::exception& e) {
    return fail(cfg, 2, "numerical", e.what());
  }
  return 0;
}
