#include "fixtures.hpp"
#include "medbal/baseline_weights.hpp"
#include "medbal/logistic.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace medbal;

TEST_CASE("intercept-only logit recovers the treated share") {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(100);
  for (int i = 0; i < 30; ++i) d[i * 3] = 1.0;
  const PropensityFit fit = fit_logistic(Eigen::MatrixXd::Ones(100, 1), d);
  CHECK(fit.converged);
  CHECK(fit.score_norm < 1e-8);
  for (Eigen::Index i = 0; i < 100; ++i) CHECK(fit.fitted[i] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("logit recovers known coefficients within Monte Carlo error") {
  const int n = 100000;
  std::mt19937_64 eng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd d(n);
  const Eigen::Vector3d beta(-0.3, 0.8, -0.5);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = normal(eng);
    x(i, 2) = normal(eng);
    d[i] = unif(eng) < logistic(x.row(i).dot(beta)) ? 1.0 : 0.0;
  }
  const PropensityFit fit = fit_logistic(x, d);
  REQUIRE(fit.converged);
  // standard errors from the inverse Fisher information
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    const double p = fit.fitted[i];
    info += p * (1 - p) * x.row(i).transpose() * x.row(i);
  }
  const Eigen::VectorXd se = info.inverse().diagonal().cwiseSqrt();
  for (int j = 0; j < 3; ++j) CHECK(std::abs(fit.coef[j] - beta[j]) < 3.0 * se[j]);
}

TEST_CASE("perfect separation is flagged") {
  Eigen::MatrixXd x(10, 2);
  Eigen::VectorXd d(10);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = i;
    d[i] = i >= 5 ? 1.0 : 0.0;
  }
  const PropensityFit fit = fit_logistic(x, d);
  CHECK(fit.separation);
  CHECK(fit.fitted.allFinite());
  CHECK((fit.fitted.array() >= 0.0).all());
  CHECK((fit.fitted.array() <= 1.0).all());
}

TEST_CASE("eif weights at one half are two before normalization") {
  const Dataset data = fixture::toy(20, 1, 3);
  const Eigen::VectorXd half = Eigen::VectorXd::Constant(20, 0.5);
  const WeightSet ws = eif_weights(data, half, half, Orientation::standard);
  // all raw weights equal 2, so normalized weights are uniform within group
  for (Eigen::Index i = 0; i < 20; ++i) {
    if (data.d[i] == 0.0) CHECK(ws.w1[i] == doctest::Approx(1.0 / data.control_count()));
    if (data.d[i] == 1.0) CHECK(ws.w2[i] == doctest::Approx(1.0 / data.treated_count()));
  }
  CHECK(std::abs(ws.w1.sum() - 1.0) < 1e-12);
  CHECK(std::abs(ws.w2.sum() - 1.0) < 1e-12);
}

TEST_CASE("trimming clamps a small control propensity") {
  Dataset data = fixture::toy(6, 1, 4);
  data.d << 0, 0, 1, 1, 0, 1;
  Eigen::VectorXd pi1 = Eigen::VectorXd::Constant(6, 0.5);
  pi1[0] = 0.995;  // pi0 = 0.005
  const Eigen::VectorXd xi1 = Eigen::VectorXd::Constant(6, 0.5);
  const WeightSet ws = eif_weights(data, pi1, xi1, Orientation::standard, TrimInterval{});
  // raw w1 = (100, 2, 2) on controls 0, 1, 4
  CHECK(ws.w1[0] == doctest::Approx(100.0 / 104.0));
  CHECK(ws.w1[1] == doctest::Approx(2.0 / 104.0));
  CHECK(ws.w1.maxCoeff() / ws.w1[1] <= 50.0 + 1e-9);
}

TEST_CASE("untrimmed weights with a zero propensity raise a range error") {
  Dataset data = fixture::toy(6, 1, 4);
  data.d << 0, 0, 1, 1, 0, 1;
  Eigen::VectorXd pi1 = Eigen::VectorXd::Constant(6, 0.5);
  pi1[0] = 1.0;
  const Eigen::VectorXd xi1 = Eigen::VectorXd::Constant(6, 0.5);
  CHECK_THROWS_AS(eif_weights(data, pi1, xi1, Orientation::standard), std::range_error);
}

TEST_CASE("true propensity weights are positive and normalized") {
  const Dataset data = fixture::toy(50, 2, 8);
  std::mt19937_64 eng(1);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  Eigen::VectorXd pi1(50), xi1(50);
  for (int i = 0; i < 50; ++i) {
    pi1[i] = unif(eng);
    xi1[i] = unif(eng);
  }
  for (Orientation o : {Orientation::standard, Orientation::exchanged}) {
    const WeightSet ws = true_ps_weights(data, pi1, xi1, o);
    CHECK(std::abs(ws.w1.sum() - 1.0) < 1e-12);
    CHECK(std::abs(ws.w2.sum() - 1.0) < 1e-12);
    const auto m1 = ws.step1_mask(data);
    for (Eigen::Index i = 0; i < 50; ++i) {
      if (m1[static_cast<std::size_t>(i)]) CHECK(ws.w1[i] > 0.0);
      else CHECK(ws.w2[i] > 0.0);
    }
  }
  const WeightSet uniform =
      true_ps_weights(data, Eigen::VectorXd::Constant(50, 0.5), Eigen::VectorXd::Constant(50, 0.5),
                      Orientation::standard);
  for (Eigen::Index i = 0; i < 50; ++i) {
    if (data.d[i] == 0.0) CHECK(uniform.w1[i] == doctest::Approx(1.0 / data.control_count()));
  }
}

TEST_CASE("just-identified CBPS solves its moments") {
  const Dataset data = fixture::toy(200, 2, 19);
  const DesignMatrix c =
      build_basis(data, BasisSpec::linear({"x1", "x2"}), BasisScope::covariates);
  const DesignMatrix b =
      build_basis(data, BasisSpec::linear({"m", "x1", "x2"}), BasisScope::covariates_and_mediators);
  CbpsOptions opts;
  opts.include_score = false;
  const CbpsFit fit = fit_cbps(data, c, b, opts);
  CHECK(fit.objective1 < 1e-10);
  CHECK(fit.objective2 < 1e-10);
}

TEST_CASE("over-identified CBPS does not move uphill from the logit start") {
  const Dataset data = fixture::toy(200, 2, 23);
  const DesignMatrix c =
      build_basis(data, BasisSpec::linear({"x1", "x2"}), BasisScope::covariates);
  const DesignMatrix b =
      build_basis(data, BasisSpec::linear({"m", "x1", "x2"}), BasisScope::covariates_and_mediators);
  const CbpsFit fit = fit_cbps(data, c, b);
  CHECK(fit.objective1 <= fit.start_objective1);
  CHECK(fit.objective2 <= fit.start_objective2);
  const WeightSet ws = cbps_weights(data, c, b, Orientation::exchanged);
  CHECK(std::abs(ws.w1.sum() - 1.0) < 1e-12);
  CHECK(std::abs(ws.w2.sum() - 1.0) < 1e-12);
}

TEST_CASE("fitted propensity models stay inside the unit interval") {
  const Dataset data = fixture::toy(150, 2, 29);
  const DesignMatrix c =
      build_basis(data, BasisSpec::linear({"x1", "x2"}), BasisScope::covariates);
  const DesignMatrix b =
      build_basis(data, BasisSpec::linear({"m", "x1", "x2"}), BasisScope::covariates_and_mediators);
  const auto [pi, xi] = fit_propensities(data, c, b);
  CHECK(pi.model == PropensityModel::pi_on_x);
  CHECK(xi.model == PropensityModel::xi_on_mx);
  CHECK((pi.fitted.array() > 0.0).all());
  CHECK((xi.fitted.array() < 1.0).all());
  CHECK(pi.score_norm < 1e-8);
}
