// Variable-exponent Lebesgue and Sobolev functionals on sampled fields.
#pragma once

#include <stdexcept>

#include "pxlap/exponent.hpp"
#include "pxlap/grid.hpp"

namespace pxl {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NormReport {
  double norm = 0.0;
  double modular = 0.0;
  int bisection_iters = 0;
  /// Relative width of the final bracket.
  double bracket_width = 0.0;
};

/// Trapezoid quadrature of |u(x)|^{p(x)}.
double modular(const ScalarField& u, const ExponentField& p);

/// inf{lambda > 0 : modular(u / lambda) <= 1} by bisection.
NormReport luxemburg_norm(const ScalarField& u, const ExponentField& p, double tol);

struct SandwichCheck {
  double lhs = 0.0;
  double mid = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// min(|u|^{p+}, |u|^{p-}) <= modular(u) <= max(|u|^{p+}, |u|^{p-}) with
/// slack 1e-9 * (1 + modular).
SandwichCheck check_sandwich(const ScalarField& u, const ExponentField& p);

inline constexpr double kHolderConstant = 2.0;

struct HolderCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds() const { return lhs <= rhs; }
};

/// lhs = integral |u||v|, rhs = 2 |u|_{p(.)} |v|_{p'(.)} with p' = p / (p - 1).
HolderCheck holder_pairing(const ScalarField& u, const ScalarField& v, const ExponentField& p);

/// |u|_{L^p(.)} + ||Du||_{L^p(.)}, one-sided differences on the boundary.
double sobolev_norm(const ScalarField& u, const ExponentField& p, double tol);

}  // namespace pxl
