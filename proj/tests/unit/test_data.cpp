#include "fixtures.hpp"
#include "medbal/data.hpp"

#include <doctest.h>

#include <cmath>

using namespace medbal;

namespace {

ColumnRoles roles_ydmx() { return {"y", "d", {"m"}, {"x1"}, std::nullopt}; }

}  // namespace

TEST_CASE("load_csv parses a four-row file") {
  auto path = fixture::write_text("four.csv", "y,d,m,x1\n1.5,1,0,2\n2,0,1,3\n3,1,1,4\n4,0,0,5\n");
  const Dataset data = load_csv(path, roles_ydmx());
  CHECK(data.n() == 4);
  CHECK(data.treated_count() == 2);
  CHECK(data.m.cols() == 1);
  CHECK(data.x.cols() == 1);
  CHECK(data.y[0] == 1.5);
  CHECK(data.x(3, 0) == 5.0);
}

TEST_CASE("load_csv rejects a non-binary treatment") {
  auto path = fixture::write_text("nonbinary.csv", "y,d,m,x1\n1,1,0,2\n2,2,1,3\n3,0,1,4\n");
  CHECK_THROWS_WITH_AS(load_csv(path, roles_ydmx()), doctest::Contains("non-binary treatment"),
                       DataError);
}

TEST_CASE("load_csv reports missing columns and values with context") {
  auto path = fixture::write_text("missing.csv", "y,d,m\n1,1,0\n2,0,1\n");
  CHECK_THROWS_WITH_AS(load_csv(path, roles_ydmx()), doctest::Contains("missing column 'x1'"),
                       DataError);
  auto path2 = fixture::write_text("na.csv", "y,d,m,x1\n1,1,0,2\n2,0,NA,3\n");
  CHECK_THROWS_WITH_AS(load_csv(path2, roles_ydmx()), doctest::Contains("row 2"), DataError);
}

TEST_CASE("load_csv rejects an empty group") {
  auto path = fixture::write_text("onegroup.csv", "y,d,m,x1\n1,1,0,2\n2,1,1,3\n");
  CHECK_THROWS_WITH_AS(load_csv(path, roles_ydmx()), doctest::Contains("empty control group"),
                       DataError);
}

TEST_CASE("load_csv maps a two-level text treatment with a reference level") {
  auto path = fixture::write_text("text.csv", "y,d,m,x1\n1,ctrl,0,2\n2,trt,1,3\n3,ctrl,1,4\n");
  ColumnRoles roles = roles_ydmx();
  CHECK_THROWS_AS(load_csv(path, roles), DataError);
  roles.reference_level = "ctrl";
  const Dataset data = load_csv(path, roles);
  CHECK(data.d[0] == 0.0);
  CHECK(data.d[1] == 1.0);
}

TEST_CASE("csv round trip is bitwise for finite doubles") {
  Dataset data = fixture::toy(30, 2, 5);
  data.y[3] = 0.1 + 0.2;
  data.x(4, 1) = 1e-300;
  auto path = fixture::temp_path("roundtrip.csv");
  write_csv(data, path);
  const Dataset back = load_csv(path, {"y", "d", {"m"}, {"x1", "x2"}, std::nullopt});
  CHECK(back.y == data.y);
  CHECK(back.d == data.d);
  CHECK(back.m == data.m);
  CHECK(back.x == data.x);
}

TEST_CASE("build_basis with a raw column and the constant") {
  Dataset data;
  data.y = Eigen::Vector3d(0, 1, 2);
  data.d = Eigen::Vector3d(0, 1, 0);
  data.m = Eigen::MatrixXd::Zero(3, 1);
  data.x = Eigen::MatrixXd(3, 1);
  data.x << 1, 2, 3;
  data.mediator_names = {"m"};
  data.covariate_names = {"x1"};
  const DesignMatrix dm = build_basis(data, BasisSpec::linear({"x1"}), BasisScope::covariates);
  Eigen::MatrixXd expected(3, 2);
  expected << 1, 1, 2, 1, 3, 1;
  CHECK(dm.values == expected);
  CHECK(dm.constant_column() == 1);
  CHECK(dm.non_constant_cols() == 1);
  CHECK(dm.column_names.back() == "(const)");
}

TEST_CASE("mediator terms need the mediator scope") {
  const Dataset data = fixture::toy(20, 1, 3);
  BasisSpec spec;
  spec.terms = {Term::raw("x1"), Term::interaction({"m", "x1"})};
  CHECK_THROWS_AS(build_basis(data, spec, BasisScope::covariates), DataError);
  const DesignMatrix dm = build_basis(data, spec, BasisScope::covariates_and_mediators);
  CHECK(dm.cols() == 3);
  CHECK(dm.values(5, 1) == doctest::Approx(data.m(5, 0) * data.x(5, 0)));
}

TEST_CASE("unknown columns and duplicate terms are errors") {
  const Dataset data = fixture::toy(20, 1, 3);
  CHECK_THROWS_AS(build_basis(data, BasisSpec::linear({"nope"}), BasisScope::covariates), DataError);
  BasisSpec spec;
  spec.terms = {Term::raw("x1"), Term::raw("x1")};
  CHECK_THROWS_AS(build_basis(data, spec, BasisScope::covariates), DataError);
}

TEST_CASE("four demographics give twenty polynomial terms") {
  Dataset data = fixture::toy(60, 4, 9);
  for (int i = 0; i < data.n(); ++i) data.x(i, 2) = i % 2;  // dummy
  const BasisSpec spec = polynomial_basis(data, {"x1", "x2", "x3", "x4"}, 3, 3, false);
  CHECK(spec.terms.size() == 20);
  const DesignMatrix dm = build_basis(data, spec, BasisScope::covariates);
  CHECK(dm.cols() == 20);
  for (const auto& name : dm.column_names) CHECK(name.find("x3^") == std::string::npos);
}

TEST_CASE("standardized raw columns have zero mean and unit sd") {
  Dataset data = fixture::toy(50, 2, 11);
  data.x.col(1) = data.x.col(1) * 7.0 + Eigen::VectorXd::Constant(50, 3.0);
  BasisSpec spec = BasisSpec::linear({"x1", "x2"});
  spec.standardize = true;
  const DesignMatrix dm = build_basis(data, spec, BasisScope::covariates);
  for (int j = 0; j < 2; ++j) {
    const Eigen::VectorXd c = dm.values.col(j);
    const double mean = c.mean();
    const double sd = std::sqrt((c.array() - mean).square().sum() / (c.size() - 1));
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::abs(sd - 1.0) < 1e-12);
  }
  const DesignMatrix again = build_basis(data, spec, BasisScope::covariates);
  CHECK(again.values == dm.values);
  const DesignMatrix frozen = build_basis(data, spec, BasisScope::covariates, dm.transforms);
  CHECK(frozen.values == dm.values);
}

TEST_CASE("zero-variance column cannot be standardized") {
  Dataset data = fixture::toy(20, 1, 2);
  data.x.col(0).setConstant(4.0);
  BasisSpec spec = BasisSpec::linear({"x1"});
  spec.standardize = true;
  CHECK_THROWS_AS(build_basis(data, spec, BasisScope::covariates), DataError);
}

TEST_CASE("parse_term forms") {
  CHECK(parse_term("x1") == Term::raw("x1"));
  CHECK(parse_term("x1^2") == Term::pow("x1", 2));
  CHECK(parse_term("m*x1") == Term::interaction({"m", "x1"}));
  CHECK(parse_term("1") == Term::constant());
  CHECK(Term::interaction({"M", "Z1"}).name() == "M*Z1");
}

TEST_CASE("with_flipped_treatment swaps the groups") {
  const Dataset data = fixture::toy(25, 1, 4);
  const Dataset flipped = data.with_flipped_treatment();
  CHECK(flipped.treated_count() == data.control_count());
  CHECK((flipped.d + data.d).isApproxToConstant(1.0));
}
