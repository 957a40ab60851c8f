#include "pxlap/operator.hpp"

#include "pxlap/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pxl {

namespace {

std::string at_node(const Grid& g, std::size_t node) {
  const Vec x = g.point(node);
  std::ostringstream os;
  os << "node " << node << " (";
  for (int a = 0; a < g.dim(); ++a) os << (a ? ", " : "") << x[a];
  os << ")";
  return os.str();
}

void require_valid(const Grid& g, const std::vector<bool>& valid, std::size_t node) {
  if (!stencil_in_mask(g, valid, node)) {
    throw GridError("test function support reaches " + at_node(g, node) +
                    " where the field has no full stencil");
  }
}

template <typename Integrand>
double integrate_over_support(const ScalarField& u, const TestFunction& psi,
                              const std::vector<bool>& valid, Integrand&& f) {
  const Grid& g = u.grid;
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Vec x = g.point(i);
    if (!psi.in_support(x)) continue;
    require_valid(g, valid, i);
    s += quadrature_weight(g, i) * f(i, x);
  }
  return s;
}

}  // namespace

OperatorEval evaluate_jet(const Vec& grad, const Mat& hess, double p, const Vec& dp, int dim) {
  OperatorEval e;
  e.grad_norm = norm(grad, dim);
  if (e.grad_norm == 0.0) {
    throw UndefinedAtCriticalPoint("nondivergence form is undefined where Du = 0");
  }
  const double a = std::pow(e.grad_norm, p - 2.0);
  const Vec hg = mat_vec(hess, grad, dim);
  const double delta_inf = dot(hg, grad, dim) / (e.grad_norm * e.grad_norm);
  e.trace_term = a * trace(hess, dim);
  e.infinity_term = (p - 2.0) * a * delta_inf;
  e.log_term = a * std::log(e.grad_norm) * dot(dp, grad, dim);
  e.total = -(e.trace_term + e.infinity_term + e.log_term);
  return e;
}

OperatorEval nondiv_eval(const ScalarField& u, const ExponentField& p, std::size_t node) {
  const Grid& g = u.grid;
  const Vec x = g.point(node);
  return evaluate_jet(gradient_fd(u, node), hessian_fd(u, node), p(x), p.gradient(x), g.dim());
}

double regularized_jet(const Vec& grad, const Mat& hess, double p, const Vec& dp, int dim,
                       double delta, LogNormalization log_norm) {
  if (!(delta > 0.0)) throw NumericalError("regularization requires delta > 0");
  const double s = dot(grad, grad, dim) + delta;
  const double a = std::pow(s, 0.5 * (p - 2.0));
  const Vec hg = mat_vec(hess, grad, dim);
  const double lg = log_norm == LogNormalization::Consistent ? 0.5 * std::log(s) : std::log(s);
  return -a * (trace(hess, dim) + (p - 2.0) / s * dot(hg, grad, dim)) - a * lg * dot(dp, grad, dim);
}

double regularized_eval(const ScalarField& u, const ExponentField& p, std::size_t node,
                        double delta, LogNormalization log_norm) {
  const Grid& g = u.grid;
  const Vec x = g.point(node);
  return regularized_jet(gradient_fd(u, node), hessian_fd(u, node), p(x), p.gradient(x), g.dim(),
                         delta, log_norm);
}

double nondiv_total_or_limit(const ScalarField& u, const ExponentField& p, std::size_t node) {
  const Grid& g = u.grid;
  const Vec du = gradient_fd(u, node);
  if (norm(du, g.dim()) > 0.0) return nondiv_eval(u, p, node).total;
  const double px = p(g.point(node));
  if (px < 2.0) {
    throw UndefinedAtCriticalPoint("nondivergence form has no limit at Du = 0 when p < 2 (" +
                                   at_node(g, node) + ")");
  }
  // |Du|^{p-2} -> 0 for p > 2; for p = 2 only the Laplacian survives.
  return px == 2.0 ? -trace(hessian_fd(u, node), g.dim()) : 0.0;
}

double flux_divergence(const ScalarField& u, const ExponentField& p, std::size_t node) {
  const Grid& g = u.grid;
  const int n = g.dim();
  if (!g.is_interior(node)) throw GridError("flux_divergence requires an interior node");
  const Index ijk = g.unflat(node);
  auto val = [&](Index k) { return u[g.flat(k)]; };
  auto plus = [](Index k, int a, int s) {
    k[a] += s;
    return k;
  };

  // Flux component along `a` at the midpoint between `k` and k + e_a.
  auto half_flux = [&](const Index& k, int a) {
    const Index kn = plus(k, a, 1);
    Vec grad{};
    grad[a] = (val(kn) - val(k)) / g.h(a);
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      grad[b] = (val(plus(k, b, 1)) - val(plus(k, b, -1)) + val(plus(kn, b, 1)) -
                 val(plus(kn, b, -1))) /
                (4.0 * g.h(b));
    }
    Vec mid = g.point(k);
    mid[a] += 0.5 * g.h(a);
    const double gn = norm(grad, n);
    const double px = p(mid);
    const double factor = gn == 0.0 ? (px == 2.0 ? 1.0 : 0.0) : std::pow(gn, px - 2.0);
    return factor * grad[a];
  };

  double div = 0.0;
  for (int a = 0; a < n; ++a) {
    div += (half_flux(ijk, a) - half_flux(plus(ijk, a, -1), a)) / g.h(a);
  }
  return -div;
}

WeakForm::WeakForm(const ScalarField& u, const ExponentField& p, double delta)
    : grid_(u.grid), nodal_(u.size(), 0.0) {
  const SimplexMesh mesh(u.grid);
  const int n = u.grid.dim();
  const double h2 = u.grid.h_max() * u.grid.h_max();
  for (const Simplex& s : mesh.simplices()) {
    const Vec g = mesh.gradient(s, u.values);
    const double px = p(s.centroid);
    const double g2 = dot(g, g, n);
    double f;
    if (delta > 0.0) {
      f = std::pow(g2 + delta, 0.5 * (px - 2.0));
    } else if (px < 2.0) {
      f = std::pow(std::max(g2, h2), 0.5 * (px - 2.0));
    } else if (g2 == 0.0) {
      f = px == 2.0 ? 1.0 : 0.0;
    } else {
      f = std::pow(g2, 0.5 * (px - 2.0));
    }
    Vec flux{};
    for (int a = 0; a < n; ++a) flux[a] = f * g[a];
    mesh.scatter(s, flux, mesh.simplex_volume(), nodal_);
  }
}

double WeakForm::residual(const TestFunction& psi, const std::vector<bool>& valid) const {
  double s = 0.0;
  for (std::size_t i = 0; i < nodal_.size(); ++i) {
    const Vec x = grid_.point(i);
    if (!psi.in_support(x)) continue;
    require_valid(grid_, valid, i);
    s += psi.value(x) * nodal_[i];
  }
  return s;
}

double weak_residual(const ScalarField& u, const ExponentField& p, const TestFunction& psi,
                     const std::vector<bool>& valid) {
  return WeakForm(u, p).residual(psi, valid);
}

double regularized_weak_residual(const ScalarField& u, const ExponentField& p,
                                 const TestFunction& psi, double delta,
                                 const std::vector<bool>& valid) {
  if (!(delta > 0.0)) throw NumericalError("regularization requires delta > 0");
  return WeakForm(u, p, delta).residual(psi, valid);
}

double strong_residual_integral(const ScalarField& u, const ExponentField& p,
                                const TestFunction& psi, const std::vector<bool>& valid) {
  return integrate_over_support(u, psi, valid, [&](std::size_t i, const Vec& x) {
    return nondiv_total_or_limit(u, p, i) * psi.value(x);
  });
}

double lower_bound_degenerate(double c_tilde, double kappa, double scale, double p_plus, int n) {
  if (!(c_tilde > 1.0) || !(kappa > 1.0)) {
    throw NumericalError("degenerate lower bound requires C~ > 1 and kappa > 1");
  }
  const double tau = scale * std::log(c_tilde) * kappa * c_tilde;
  return -std::pow(c_tilde, p_plus - 2.0) * n * (p_plus + tau - 1.0) / scale;
}

Certificate certify_degenerate(const MollifiedField& uj, const Kernel& k, const ExponentField& p,
                               const TestFunction& psi, const DegenerateOptions& opts) {
  const ScalarField& u = uj.values;
  const Grid& g = u.grid;
  const int n = g.dim();
  Certificate c;
  c.observed_min = INFINITY;
  double max_grad = 0.0;
  double max_dp = 0.0;
  std::string worst;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Vec x = g.point(i);
    if (!psi.in_support(x)) continue;
    require_valid(g, uj.domain, i);
    max_grad = std::max(max_grad, norm(gradient_fd(u, i), n));
    max_dp = std::max(max_dp, norm(p.gradient(x), n));
    const double v = nondiv_total_or_limit(u, p, i);
    ++c.nodes;
    if (v < c.observed_min) {
      c.observed_min = v;
      worst = at_node(g, i);
    }
  }
  const double c_tilde =
      opts.c_tilde > 0.0 ? opts.c_tilde : std::max(1.05 * max_grad, 1.0 + 1e-6);
  const double kappa =
      opts.kappa > 0.0 ? opts.kappa : std::max(p.certified_bounds().kappa, 1.0 + 1e-6);
  const double scale = opts.normalization == Normalization::Weight ? k.w : k.eps;
  const double p_plus = p.p_plus();

  c.bound = lower_bound_degenerate(c_tilde, kappa, scale, p_plus, n);
  c.slack = 10.0 * g.h_max() * (1.0 + std::abs(c.bound));
  std::ostringstream diag;
  if (max_grad > c_tilde) {
    c.precondition_ok = false;
    diag << "C~ = " << c_tilde << " is below sup|Du| = " << max_grad << " on supp psi; ";
  }
  if (max_dp > kappa) {
    c.precondition_ok = false;
    diag << "kappa = " << kappa << " is below sup|Dp| = " << max_dp << " on supp psi; ";
  }
  c.holds = c.precondition_ok && c.nodes > 0 && c.observed_min >= c.bound - c.slack;
  diag << "worst at " << worst;
  c.diagnostic = diag.str();
  c.constants = {{"C_tilde", c_tilde},
                 {"kappa", kappa},
                 {"tau", scale * std::log(c_tilde) * kappa * c_tilde},
                 {"eps", k.eps},
                 {"w", k.w},
                 {"scale", scale},
                 {"p_plus", p_plus},
                 {"n", static_cast<double>(n)},
                 {"sup_grad", max_grad}};
  return c;
}

double singular_hessian_bound(const Kernel& k, double grad_norm) {
  return (k.q - 1.0) / k.eps * std::pow(grad_norm, (k.q - 2.0) / (k.q - 1.0));
}

double singular_lower_bound(const Kernel& k, double grad_norm, double p_plus, int n, double delta,
                            double kappa_hat) {
  const double q = k.q;
  const double c0 = k.eps * std::log(grad_norm * grad_norm + delta);
  return -(n / k.eps) * std::pow(grad_norm, (p_plus + q - 4.0) / (q - 1.0)) *
         (q - 1.0 + p_plus - 2.0 + c0 * kappa_hat * std::pow(grad_norm, 1.0 / (q - 1.0)));
}

Certificate lower_bound_singular(const InfConvResult& r, const ExponentField& p,
                                 std::size_t node, double delta, double kappa_hat) {
  if (r.kernel.variant != KernelVariant::Singular) {
    throw InfConvError("singular certificate requires a singular kernel");
  }
  const ScalarField& u = r.u_eps;
  const Grid& g = u.grid;
  const int n = g.dim();
  const double h = g.h_max();
  require_valid(g, r.domain, node);

  Certificate c;
  c.nodes = 1;
  const Vec du = gradient_fd(u, node);
  const Mat hess = hessian_fd(u, node);
  const double gn = norm(du, n);
  const double lam = max_eigenvalue(hess, n);
  c.constants = {{"eps", r.kernel.eps}, {"q", r.kernel.q},     {"w", r.kernel.w},
                 {"delta", delta},      {"kappa_hat", kappa_hat}, {"p_plus", p.p_plus()},
                 {"n", static_cast<double>(n)}, {"grad_norm", gn}, {"lambda_max", lam}};
  if (gn <= h) {
    // Vanishing gradient: the Hessian must be (numerically) nonpositive.
    c.bound = 0.0;
    c.observed_min = -lam;
    c.slack = 10.0 * h;
    c.holds = lam <= 10.0 * h;
    c.diagnostic = "critical-point branch: lambda_max(D2u_eps) <= 10h";
    return c;
  }
  const Vec x = g.point(node);
  const double gamma = regularized_jet(du, hess, p(x), p.gradient(x), n, delta,
                                       LogNormalization::Squared);
  c.bound = singular_lower_bound(r.kernel, gn, p.p_plus(), n, delta, kappa_hat);
  c.observed_min = gamma;
  c.slack = 10.0 * h * (1.0 + std::abs(c.bound));
  const double hb = singular_hessian_bound(r.kernel, gn);
  const double hslack = 10.0 * h * (1.0 + hb);
  c.constants["C0"] = r.kernel.eps * std::log(gn * gn + delta);
  c.constants["hessian_bound"] = hb;
  const bool lap_ok = gamma >= c.bound - c.slack;
  const bool hess_ok = lam <= hb + hslack;
  c.holds = lap_ok && hess_ok;
  std::ostringstream os;
  os << "Gamma = " << gamma << " vs bound " << c.bound << "; lambda_max = " << lam
     << " vs Hessian bound " << hb << " at " << at_node(g, node);
  c.diagnostic = os.str();
  return c;
}

}  // namespace pxl
