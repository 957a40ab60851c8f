#include "pxlap/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace pxl {

namespace {

// Exponents are evaluated once per node; bisection reuses them.
std::vector<double> node_exponents(const Grid& g, const ExponentField& p) {
  std::vector<double> e(g.node_count());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = p(g.point(i));
  return e;
}

double scaled_modular(const ScalarField& u, const std::vector<double>& expo, double lambda) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = std::abs(u[i]) / lambda;
    if (a == 0.0) continue;
    const double t = std::pow(a, expo[i]);
    if (!std::isfinite(t)) {
      std::ostringstream os;
      os << "modular overflows at node " << i << " (|u|/lambda = " << a << ", p = " << expo[i]
         << ")";
      throw NumericalError(os.str());
    }
    s += quadrature_weight(u.grid, i) * t;
  }
  return s;
}

}  // namespace

double modular(const ScalarField& u, const ExponentField& p) {
  return scaled_modular(u, node_exponents(u.grid, p), 1.0);
}

NormReport luxemburg_norm(const ScalarField& u, const ExponentField& p, double tol) {
  if (!(tol > 0.0)) throw NumericalError("luxemburg_norm requires tol > 0");
  NormReport rep;
  const auto expo = node_exponents(u.grid, p);
  rep.modular = scaled_modular(u, expo, 1.0);
  if (!std::isfinite(rep.modular)) throw NumericalError("modular is not finite");
  if (rep.modular == 0.0) return rep;

  // modular(u/lambda) lies between lambda^{-p+} m and lambda^{-p-} m, so the
  // root lambda* lies between m^{1/p+} and m^{1/p-}.
  const double m = rep.modular;
  const double pm = *std::min_element(expo.begin(), expo.end());
  const double pp = *std::max_element(expo.begin(), expo.end());
  double lo = std::min(std::pow(m, 1.0 / pp), std::pow(m, 1.0 / pm));
  double hi = std::max(std::pow(m, 1.0 / pp), std::pow(m, 1.0 / pm));
  lo *= 1.0 - 1e-12;
  hi *= 1.0 + 1e-12;
  while (scaled_modular(u, expo, lo) < 1.0) lo *= 0.5;
  while (scaled_modular(u, expo, hi) > 1.0) hi *= 2.0;

  while ((hi - lo) > tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (scaled_modular(u, expo, mid) > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++rep.bisection_iters;
  }
  rep.norm = 0.5 * (lo + hi);
  rep.bracket_width = (hi - lo) / hi;
  return rep;
}

SandwichCheck check_sandwich(const ScalarField& u, const ExponentField& p) {
  const NormReport r = luxemburg_norm(u, p, 1e-14);
  const auto expo = node_exponents(u.grid, p);
  const double pm = *std::min_element(expo.begin(), expo.end());
  const double pp = *std::max_element(expo.begin(), expo.end());
  SandwichCheck c;
  const double a = std::pow(r.norm, pp);
  const double b = std::pow(r.norm, pm);
  c.lhs = std::min(a, b);
  c.rhs = std::max(a, b);
  c.mid = r.modular;
  const double slack = 1e-9 * (1.0 + c.mid);
  c.holds = c.lhs <= c.mid + slack && c.mid <= c.rhs + slack;
  return c;
}

HolderCheck holder_pairing(const ScalarField& u, const ScalarField& v, const ExponentField& p) {
  HolderCheck c;
  std::vector<double> prod(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) prod[i] = std::abs(u[i]) * std::abs(v[i]);
  c.lhs = integrate(ScalarField(u.grid, std::move(prod)));
  const ExponentField q = p.conjugate(u.grid);
  c.rhs = kHolderConstant * luxemburg_norm(u, p, 1e-12).norm * luxemburg_norm(v, q, 1e-12).norm;
  return c;
}

double sobolev_norm(const ScalarField& u, const ExponentField& p, double tol) {
  std::vector<double> grad(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) grad[i] = norm(gradient_full(u, i), u.grid.dim());
  return luxemburg_norm(u, p, tol).norm +
         luxemburg_norm(ScalarField(u.grid, std::move(grad)), p, tol).norm;
}

}  // namespace pxl
