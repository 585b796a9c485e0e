#include "medbal/penalty.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace medbal;

TEST_CASE("entropy conjugate closed form") {
  const Penalty pen = Penalty::entropy();
  CHECK(rho(pen, 1.0) == doctest::Approx(1.0));
  CHECK(rho_prime(pen, 1.0) == doctest::Approx(1.0));
  CHECK(rho_second(pen, 1.0) == doctest::Approx(1.0));
  CHECK(rho(pen, 0.0) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("uncentered quadratic conjugate closed form") {
  const Penalty pen = Penalty::quadratic(0);
  CHECK(rho(pen, 2.0) == doctest::Approx(1.0));
  CHECK(rho_prime(pen, 2.0) == doctest::Approx(1.0));
  CHECK(rho_second(pen, 2.0) == doctest::Approx(0.5));
}

TEST_CASE("rho matches a dense-grid Legendre transform") {
  const Penalty ent = Penalty::entropy();
  const Penalty quad = Penalty::quadratic(10);
  auto f_ent = [&](double w) { return ent.value(w); };
  auto f_quad = [&](double w) { return quad.value(w); };
  for (int i = 0; i < 100; ++i) {
    const double t = -3.0 + 6.0 * i / 99.0;
    CHECK(std::abs(rho(ent, t) - oracle::conjugate_by_grid(f_ent, t, 1e-9, 10.0)) < 1e-6);
    CHECK(std::abs(rho(quad, t) - oracle::conjugate_by_grid(f_quad, t, -3.0, 3.0)) < 1e-6);
  }
}

TEST_CASE("zeta matches one-dimensional minimization") {
  const Penalty ent = Penalty::entropy();
  auto f = [&](double w) { return ent.value(w); };
  for (int i = 0; i < 41; ++i) {
    const double y = -2.0 + 4.0 * i / 40.0;
    CHECK(std::abs(zeta(ent, y) - oracle::zeta_by_minimization(f, y, 50, 1e-12, 30.0)) < 1e-6);
  }
}

TEST_CASE("quadratic zeta equals the construction through h") {
  const int n = 7;
  const Penalty quad = Penalty::quadratic(n);
  for (double y : {-1.0, 0.0, 1.0}) {
    // h(x) = f(1/n - x) = x^2, (h')^{-1}(y) = y / 2
    const double x = y / 2.0;
    const double direct = y / n - y * x + x * x;
    CHECK(std::abs(zeta(quad, y) - direct) < 1e-10);
  }
}

TEST_CASE("derivatives match central differences") {
  for (const Penalty& pen : {Penalty::entropy(), Penalty::quadratic(5)}) {
    for (int i = 0; i < 21; ++i) {
      const double t = -2.0 + 0.2 * i;
      auto r = [&](double s) { return rho(pen, s); };
      auto rp = [&](double s) { return rho_prime(pen, s); };
      auto z = [&](double s) { return zeta(pen, s); };
      CHECK(std::abs(oracle::central_difference(r, t) - rho_prime(pen, t)) < 1e-6);
      CHECK(std::abs(oracle::central_difference(rp, t) - rho_second(pen, t)) < 1e-6);
      CHECK(std::abs(oracle::central_difference(z, t) - zeta_prime(pen, t)) < 1e-6);
    }
  }
}

TEST_CASE("Fenchel-Young inequality with equality at rho prime") {
  for (const Penalty& pen : {Penalty::entropy(), Penalty::quadratic(4)}) {
    for (int i = 0; i < 25; ++i) {
      const double t = -3.0 + 0.25 * i;
      for (int k = 1; k < 60; ++k) {
        const double w = 0.05 * k;
        CHECK(rho(pen, t) >= t * w - pen.value(w) - 1e-12);
      }
      const double ws = rho_prime(pen, t);
      CHECK(std::abs(rho(pen, t) - (t * ws - pen.value(ws))) < 1e-8);
    }
  }
}

TEST_CASE("rho prime is increasing and entropy weights are positive") {
  const Penalty ent = Penalty::entropy();
  double prev = rho_prime(ent, -20.0);
  CHECK(prev > 0.0);
  for (int i = 1; i <= 80; ++i) {
    const double cur = rho_prime(ent, -20.0 + 0.5 * i);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("penalties are strictly convex") {
  for (const Penalty& pen : {Penalty::entropy(), Penalty::quadratic(3)}) {
    for (int k = 1; k < 50; ++k) {
      const double w = 0.1 * k;
      const double h = 1e-4;
      const double fd = (pen.value(w + h) - 2 * pen.value(w) + pen.value(w - h)) / (h * h);
      CHECK(fd > 0.0);
      CHECK(pen.second_derivative(w) > 0.0);
    }
  }
}

TEST_CASE("parse_penalty") {
  CHECK(parse_penalty("entropy").kind == PenaltyKind::entropy);
  CHECK(parse_penalty("quadratic").kind == PenaltyKind::quadratic);
  CHECK_THROWS_AS(parse_penalty("huber"), std::invalid_argument);
}

TEST_CASE("custom penalty round trip") {
  const Penalty pen = Penalty::custom([](double w) { return w * w; }, [](double w) { return 2 * w; },
                                      [](double t) { return t / 2; }, [](double) { return 2.0; },
                                      -1e300, 1e300, -1e300, 1e300);
  CHECK(rho(pen, 2.0) == doctest::Approx(1.0));
  CHECK(rho_prime(pen, 2.0) == doctest::Approx(1.0));
}
