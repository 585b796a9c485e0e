#include "medbal/penalty.hpp"

#include <cmath>
#include <stdexcept>

namespace medbal {

Penalty Penalty::entropy() {
  Penalty p;
  p.kind = PenaltyKind::entropy;
  p.domain_lower = 0.0;
  return p;
}

Penalty Penalty::quadratic(int n_ref) {
  if (n_ref < 0) throw std::invalid_argument("quadratic penalty: n_ref must be >= 0");
  Penalty p;
  p.kind = PenaltyKind::quadratic;
  p.n_ref = n_ref;
  return p;
}

Penalty Penalty::custom(std::function<double(double)> f, std::function<double(double)> f_prime,
                        std::function<double(double)> f_prime_inverse,
                        std::function<double(double)> f_second, double domain_lower,
                        double domain_upper, double conjugate_lower, double conjugate_upper) {
  Penalty p;
  p.kind = PenaltyKind::custom;
  p.custom_f = std::move(f);
  p.custom_f_prime = std::move(f_prime);
  p.custom_f_prime_inverse = std::move(f_prime_inverse);
  p.custom_f_second = std::move(f_second);
  p.domain_lower = domain_lower;
  p.domain_upper = domain_upper;
  p.conjugate_lower = conjugate_lower;
  p.conjugate_upper = conjugate_upper;
  return p;
}

Penalty Penalty::with_reference(int n) const {
  Penalty p = *this;
  if (kind == PenaltyKind::quadratic) p.n_ref = n;
  return p;
}

std::string Penalty::name() const {
  switch (kind) {
    case PenaltyKind::entropy:
      return "entropy";
    case PenaltyKind::quadratic:
      return "quadratic";
    case PenaltyKind::custom:
      return "custom";
  }
  return "unknown";
}

double Penalty::value(double w) const {
  switch (kind) {
    case PenaltyKind::entropy:
      return w > 0.0 ? w * std::log(w) : (w == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    case PenaltyKind::quadratic: {
      const double e = w - center();
      return e * e;
    }
    case PenaltyKind::custom:
      return custom_f(w);
  }
  return 0.0;
}

double Penalty::derivative(double w) const {
  switch (kind) {
    case PenaltyKind::entropy:
      return std::log(w) + 1.0;
    case PenaltyKind::quadratic:
      return 2.0 * (w - center());
    case PenaltyKind::custom:
      return custom_f_prime(w);
  }
  return 0.0;
}

double Penalty::second_derivative(double w) const {
  switch (kind) {
    case PenaltyKind::entropy:
      return 1.0 / w;
    case PenaltyKind::quadratic:
      return 2.0;
    case PenaltyKind::custom:
      return custom_f_second(w);
  }
  return 0.0;
}

double Penalty::derivative_inverse(double t) const {
  switch (kind) {
    case PenaltyKind::entropy:
      return std::exp(t - 1.0);
    case PenaltyKind::quadratic:
      return center() + 0.5 * t;
    case PenaltyKind::custom:
      if (t < conjugate_lower || t > conjugate_upper) {
        throw std::domain_error("penalty conjugate undefined at t = " + std::to_string(t));
      }
      return custom_f_prime_inverse(t);
  }
  return 0.0;
}

bool Penalty::in_domain(double w) const { return w > domain_lower && w < domain_upper; }

Penalty parse_penalty(const std::string& name) {
  if (name == "entropy") return Penalty::entropy();
  if (name == "quadratic") return Penalty::quadratic();
  throw std::invalid_argument("unknown penalty '" + name + "' (expected entropy|quadratic)");
}

double rho(const Penalty& pen, double t) {
  switch (pen.kind) {
    case PenaltyKind::entropy:
      return std::exp(t - 1.0);
    case PenaltyKind::quadratic:
      return pen.center() * t + 0.25 * t * t;
    case PenaltyKind::custom: {
      const double w = pen.derivative_inverse(t);
      return w * t - pen.value(w);
    }
  }
  return 0.0;
}

double rho_prime(const Penalty& pen, double t) { return pen.derivative_inverse(t); }

double rho_second(const Penalty& pen, double t) {
  switch (pen.kind) {
    case PenaltyKind::entropy:
      return std::exp(t - 1.0);
    case PenaltyKind::quadratic:
      return 0.5;
    case PenaltyKind::custom:
      return 1.0 / pen.second_derivative(pen.derivative_inverse(t));
  }
  return 0.0;
}

double zeta(const Penalty& pen, double y) {
  if (-y < pen.conjugate_lower || -y > pen.conjugate_upper) {
    throw std::domain_error("zeta undefined at y = " + std::to_string(y));
  }
  return -rho(pen, -y);
}

double zeta_prime(const Penalty& pen, double y) {
  if (-y < pen.conjugate_lower || -y > pen.conjugate_upper) {
    throw std::domain_error("zeta' undefined at y = " + std::to_string(y));
  }
  return rho_prime(pen, -y);
}

}  // namespace medbal
