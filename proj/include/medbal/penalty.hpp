#pragma once

#include <functional>
#include <limits>
#include <string>

namespace medbal {

enum class PenaltyKind { entropy, quadratic, custom };

/// Strictly convex dispersion penalty f(w) on the balancing weights.
///
/// entropy:   f(w) = w log w,         w > 0
/// quadratic: f(w) = (w - 1/n_ref)^2, n_ref = 0 gives the uncentered w^2
/// custom:    user-supplied f, f', (f')^{-1}, f''
struct Penalty {
  PenaltyKind kind = PenaltyKind::entropy;
  int n_ref = 0;

  std::function<double(double)> custom_f;
  std::function<double(double)> custom_f_prime;
  std::function<double(double)> custom_f_prime_inverse;
  std::function<double(double)> custom_f_second;
  double domain_lower = -std::numeric_limits<double>::infinity();
  double domain_upper = std::numeric_limits<double>::infinity();
  /// Range of t on which (f')^{-1}(t) is defined.
  double conjugate_lower = -std::numeric_limits<double>::infinity();
  double conjugate_upper = std::numeric_limits<double>::infinity();

  static Penalty entropy();
  static Penalty quadratic(int n_ref = 0);
  static Penalty custom(std::function<double(double)> f, std::function<double(double)> f_prime,
                        std::function<double(double)> f_prime_inverse,
                        std::function<double(double)> f_second, double domain_lower,
                        double domain_upper, double conjugate_lower, double conjugate_upper);

  /// Copy whose quadratic centering uses 1/n (no-op for other kinds).
  Penalty with_reference(int n) const;

  std::string name() const;
  double center() const { return n_ref > 0 ? 1.0 / n_ref : 0.0; }

  double value(double w) const;
  double derivative(double w) const;
  double second_derivative(double w) const;
  double derivative_inverse(double t) const;
  bool in_domain(double w) const;
};

/// "entropy" or "quadratic"; throws std::invalid_argument otherwise.
Penalty parse_penalty(const std::string& name);

// Convex conjugate rho(t) = (f')^{-1}(t) t - f((f')^{-1}(t)); rho' = (f')^{-1}.
double rho(const Penalty& pen, double t);
double rho_prime(const Penalty& pen, double t);
double rho_second(const Penalty& pen, double t);

// First-step parameterization zeta(y) = y/n - y (h')^{-1}(y) + h((h')^{-1}(y)),
// h(x) = f(1/n - x). It reduces to -rho(-y), so n drops out and zeta'(y) =
// rho'(-y). Throws std::domain_error when -y lies outside the conjugate domain.
double zeta(const Penalty& pen, double y);
double zeta_prime(const Penalty& pen, double y);

}  // namespace medbal
