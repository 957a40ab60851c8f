#include "pxlap/solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "pxlap/simplex.hpp"
#include "pxlap/spaces.hpp"

namespace pxl {

namespace {

// Floored energy, its nodal gradient and (approximate) Hessian on one mesh
// with the exponent frozen at simplex centroids.
class Problem {
 public:
  Problem(const SimplexMesh& mesh, std::vector<double> p_centroid)
      : mesh_(mesh), p_(std::move(p_centroid)) {
    floor_ = mesh.grid().h_max();
  }

  double energy(const std::vector<double>& u) const {
    const int n = mesh_.grid().dim();
    double e = 0.0;
    const auto& simplices = mesh_.simplices();
    for (std::size_t k = 0; k < simplices.size(); ++k) {
      const Vec g = mesh_.gradient(simplices[k], u);
      const double g2 = dot(g, g, n);
      const double p = p_[k];
      e += density(g2, p);
    }
    return e * mesh_.simplex_volume();
  }

  std::vector<double> gradient(const std::vector<double>& u) const {
    const int n = mesh_.grid().dim();
    std::vector<double> out(u.size(), 0.0);
    const auto& simplices = mesh_.simplices();
    for (std::size_t k = 0; k < simplices.size(); ++k) {
      const Vec g = mesh_.gradient(simplices[k], u);
      const double f = weight(dot(g, g, n), p_[k]);
      Vec flux{};
      for (int a = 0; a < n; ++a) flux[a] = f * g[a];
      mesh_.scatter(simplices[k], flux, mesh_.simplex_volume(), out);
    }
    return out;
  }

  // Interior-restricted Hessian; `full` adds the anisotropic Newton part.
  Eigen::SparseMatrix<double> hessian(const std::vector<double>& u,
                                      const std::vector<int>& unknown, int n_unknown,
                                      bool full) const {
    const Grid& grid = mesh_.grid();
    const int n = grid.dim();
    const auto& simplices = mesh_.simplices();
    std::vector<double> weights(simplices.size());
    double mean = 0.0;
    for (std::size_t k = 0; k < simplices.size(); ++k) {
      const Vec g = mesh_.gradient(simplices[k], u);
      weights[k] = weight(dot(g, g, n), p_[k]);
      mean += weights[k];
    }
    mean /= static_cast<double>(simplices.size());
    const double w_floor = 1e-8 * (mean > 0.0 ? mean : 1.0);

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(simplices.size() * (n + 1) * (n + 1));
    for (std::size_t k = 0; k < simplices.size(); ++k) {
      const Simplex& s = simplices[k];
      const Vec g = mesh_.gradient(s, u);
      const double g2 = dot(g, g, n);
      const double p = p_[k];
      const double w = std::max(weights[k], w_floor);
      // Local Hessian in gradient space: w (I + beta g g^T).
      double beta = 0.0;
      if (full && g2 > 0.0 && (p >= 2.0 || g2 >= floor_ * floor_)) beta = (p - 2.0) / g2;
      // D maps vertex values to the gradient: G_{axis[j]} = (u_{j+1} - u_j)/h.
      double dmat[kMaxDim][kMaxDim + 1] = {};
      for (int j = 0; j < n; ++j) {
        const int a = s.axis[j];
        dmat[a][j + 1] += 1.0 / grid.h(a);
        dmat[a][j] -= 1.0 / grid.h(a);
      }
      for (int r = 0; r <= n; ++r) {
        const int ir = unknown[s.v[r]];
        if (ir < 0) continue;
        for (int c = 0; c <= n; ++c) {
          const int ic = unknown[s.v[c]];
          if (ic < 0) continue;
          double dd = 0.0;
          double gr = 0.0;
          double gc = 0.0;
          for (int a = 0; a < n; ++a) {
            dd += dmat[a][r] * dmat[a][c];
            gr += g[a] * dmat[a][r];
            gc += g[a] * dmat[a][c];
          }
          trip.emplace_back(ir, ic, mesh_.simplex_volume() * w * (dd + beta * gr * gc));
        }
      }
    }
    Eigen::SparseMatrix<double> m(n_unknown, n_unknown);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
  }

 private:
  // Where p < 2 and |G| < h the density continues as the quadratic with
  // matching value and slope at |G| = h; the result is convex and C^1.
  double density(double g2, double p) const {
    const double r2 = floor_ * floor_;
    if (p < 2.0 && g2 < r2) {
      const double hp = std::pow(floor_, p);
      return hp / p - 0.5 * hp + 0.5 * std::pow(floor_, p - 2.0) * g2;
    }
    return std::pow(g2, 0.5 * p) / p;
  }

  double weight(double g2, double p) const {
    if (p < 2.0) return std::pow(std::max(g2, floor_ * floor_), 0.5 * (p - 2.0));
    if (g2 == 0.0) return p == 2.0 ? 1.0 : 0.0;
    return std::pow(g2, 0.5 * (p - 2.0));
  }

  const SimplexMesh& mesh_;
  std::vector<double> p_;
  /// Gradient magnitude below which the p < 2 diffusivity is frozen.
  double floor_ = 0.0;
};

double residual_norm(const std::vector<double>& grad, const std::vector<int>& unknown,
                     double nodal_volume) {
  double r = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (unknown[i] >= 0) r = std::max(r, std::abs(grad[i]));
  }
  return r / nodal_volume;
}

struct Minimized {
  std::vector<double> u;
  std::vector<std::pair<int, double>> trace;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string diagnostic;
};

Minimized minimize(const Problem& prob, const Grid& grid, std::vector<double> u,
                   const SolveOptions& opts) {
  std::vector<int> unknown(grid.node_count(), -1);
  int n_unknown = 0;
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    if (!grid.is_boundary(i)) unknown[i] = n_unknown++;
  }
  const double vol = grid.cell_volume();

  Minimized out;
  double e = prob.energy(u);
  std::vector<double> grad = prob.gradient(u);
  out.residual = residual_norm(grad, unknown, vol);
  out.trace.emplace_back(0, e);

  for (int it = 0; it < opts.max_iters; ++it) {
    if (out.residual <= opts.tol) break;
    if (n_unknown == 0) break;
    const bool full = opts.step_rule == StepRule::Newton;
    const Eigen::SparseMatrix<double> hess = prob.hessian(u, unknown, n_unknown, full);
    Eigen::VectorXd rhs(n_unknown);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (unknown[i] >= 0) rhs[unknown[i]] = -grad[i];
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(hess);
    Eigen::VectorXd d;
    if (ldlt.info() == Eigen::Success) d = ldlt.solve(rhs);
    double slope = d.size() == n_unknown ? -rhs.dot(d) : 0.0;
    if (!(slope < 0.0) || !std::isfinite(slope)) {
      d = rhs;  // steepest descent
      slope = -rhs.squaredNorm();
    }

    bool accepted = false;
    double alpha = 1.0;
    std::vector<double> trial(u.size());
    for (int bt = 0; bt < 60 && !accepted; ++bt, alpha *= 0.5) {
      for (std::size_t i = 0; i < u.size(); ++i) {
        trial[i] = unknown[i] >= 0 ? u[i] + alpha * d[unknown[i]] : u[i];
      }
      const double e_new = prob.energy(trial);
      if (!std::isfinite(e_new)) continue;
      if (e_new <= e + 1e-4 * alpha * slope) {
        accepted = true;
      } else if (e_new - e <= 1e-12) {
        // Below the energy's rounding level: accept steps that reduce the residual.
        std::vector<double> g_new = prob.gradient(trial);
        if (residual_norm(g_new, unknown, vol) < out.residual) accepted = true;
      }
      if (accepted) {
        u = trial;
        e = e_new;
      }
    }
    if (!accepted) {
      out.diagnostic = "line search failed at iteration " + std::to_string(it + 1);
      break;
    }
    grad = prob.gradient(u);
    out.residual = residual_norm(grad, unknown, vol);
    out.iterations = it + 1;
    out.trace.emplace_back(out.iterations, e);
  }
  out.converged = out.residual <= opts.tol;
  if (!out.converged && out.diagnostic.empty()) {
    std::ostringstream os;
    os << "residual " << out.residual << " above tol " << opts.tol << " after "
       << out.iterations << " iterations";
    out.diagnostic = os.str();
  }
  out.u = std::move(u);
  return out;
}

std::vector<double> centroid_exponents(const SimplexMesh& mesh, const ExponentField& p) {
  std::vector<double> out;
  out.reserve(mesh.simplices().size());
  for (const Simplex& s : mesh.simplices()) out.push_back(p(s.centroid));
  return out;
}

}  // namespace

double energy(const ScalarField& u, const ExponentField& p) {
  const SimplexMesh mesh(u.grid);
  const int n = u.grid.dim();
  double e = 0.0;
  for (const Simplex& s : mesh.simplices()) {
    const Vec g = mesh.gradient(s, u.values);
    const double px = p(s.centroid);
    e += std::pow(dot(g, g, n), 0.5 * px) / px;
  }
  return e * mesh.simplex_volume();
}

SolveReport solve_dirichlet(const ExponentField& p, const ScalarField& boundary,
                            const SolveOptions& opts) {
  const Grid& grid = boundary.grid;
  if (p.p_minus() <= 1.0) throw ExponentError("solver requires p_minus > 1");
  std::vector<double> u0(grid.node_count(), 0.0);
  for (std::size_t i = 0; i < u0.size(); ++i) {
    if (!grid.is_boundary(i)) continue;
    if (!std::isfinite(boundary[i])) throw NumericalError("non-finite boundary value");
    u0[i] = boundary[i];
  }
  const SimplexMesh mesh(grid);

  // Discrete harmonic extension; the p = 2 energy is quadratic, so one
  // Newton step lands on it.
  SolveOptions harmonic = opts;
  harmonic.step_rule = StepRule::Newton;
  harmonic.max_iters = std::max(opts.max_iters, 5);
  Minimized init = minimize(Problem(mesh, std::vector<double>(mesh.simplices().size(), 2.0)),
                            grid, std::move(u0), harmonic);

  Minimized m = minimize(Problem(mesh, centroid_exponents(mesh, p)), grid, std::move(init.u), opts);
  SolveReport r{ScalarField(grid, std::move(m.u)), std::move(m.trace), m.residual, m.iterations,
                m.converged, std::move(m.diagnostic)};
  return r;
}

namespace {

double flux_speed(const ExponentField& p, double t, double abs_c) {
  return std::pow(abs_c, 1.0 / (p(Vec{t, 0.0, 0.0}) - 1.0));
}

// Simpson integral of |c|^{1/(p-1)} over each cell; returns cumulative sums.
std::vector<double> cumulative(const ExponentField& p, double a, double b, double abs_c, int n) {
  std::vector<double> out(n + 1, 0.0);
  const double h = (b - a) / n;
  for (int k = 0; k < n; ++k) {
    const double x0 = a + k * h;
    const double x1 = k + 1 == n ? b : a + (k + 1) * h;
    const double panel = (x1 - x0) / 6.0 *
                         (flux_speed(p, x0, abs_c) + 4.0 * flux_speed(p, 0.5 * (x0 + x1), abs_c) +
                          flux_speed(p, x1, abs_c));
    out[k + 1] = out[k] + panel;
  }
  return out;
}

}  // namespace

double oracle_flux(const ExponentField& p, double a, double b, double ua, double ub, int n) {
  if (!(a < b)) throw GridError("oracle requires a < b");
  if (n < 1) throw GridError("oracle requires n >= 1");
  const double target = std::abs(ub - ua);
  if (target == 0.0) return 0.0;
  auto total = [&](double c) { return cumulative(p, a, b, c, n).back(); };
  double lo = 0.0;
  double hi = 1.0;
  while (total(hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw NumericalError("oracle flux bracket overflow");
  }
  for (int it = 0; it < 2000 && hi - lo > 4e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (total(mid) < target ? lo : hi) = mid;
  }
  const double c = 0.5 * (lo + hi);
  return ub > ua ? c : -c;
}

ScalarField solve_1d_oracle(const ExponentField& p, double a, double b, double ua, double ub,
                            int n) {
  const Interval iv{a, b};
  const Grid grid = make_grid(1, std::span<const Interval>(&iv, 1), std::span<const int>(&n, 1));
  const double c = oracle_flux(p, a, b, ua, ub, n);
  if (c == 0.0) return ScalarField(grid, ua);
  const std::vector<double> cum = cumulative(p, a, b, std::abs(c), n);
  const double sign = c > 0.0 ? 1.0 : -1.0;
  std::vector<double> v(n + 1);
  for (int k = 0; k <= n; ++k) v[k] = ua + sign * cum[k];
  // Pin the far end exactly to the boundary datum.
  v[n] = ub;
  return ScalarField(grid, std::move(v));
}

}  // namespace pxl
