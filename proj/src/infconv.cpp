#include "pxlap/infconv.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pxl {

namespace {

struct Offset {
  Index step{};
  double dist2 = 0.0;
};

double offset_dist2(const Grid& g, const Index& step) {
  double d2 = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    const double d = step[a] * g.h(a);
    d2 += d * d;
  }
  return d2;
}

// Lattice offsets with |offset| <= radius (or < radius when strict).
std::vector<Offset> window_offsets(const Grid& g, double radius, bool strict = false) {
  Index reach{};
  for (int a = 0; a < g.dim(); ++a) reach[a] = static_cast<int>(std::floor(radius / g.h(a) + 1e-9));
  std::vector<Offset> out;
  Index s{};
  auto rec = [&](auto&& self, int axis) -> void {
    if (axis == g.dim()) {
      const double d2 = offset_dist2(g, s);
      if (strict ? d2 < radius * radius : d2 <= radius * radius) out.push_back({s, d2});
      return;
    }
    for (int k = -reach[axis]; k <= reach[axis]; ++k) {
      s[axis] = k;
      self(self, axis + 1);
    }
    s[axis] = 0;
  };
  rec(rec, 0);
  return out;
}

bool shift(const Grid& g, std::size_t node, const Index& step, std::size_t& out) {
  Index ijk = g.unflat(node);
  for (int a = 0; a < g.dim(); ++a) {
    ijk[a] += step[a];
    if (ijk[a] < 0 || ijk[a] > g.cells(a)) return false;
  }
  out = g.flat(ijk);
  return true;
}

double sq_norm_point(const Vec& x, int dim) { return dot(x, x, dim); }

std::string node_witness(const Grid& g, std::size_t node) {
  const Vec x = g.point(node);
  std::ostringstream os;
  os << "node " << node << " at (";
  for (int a = 0; a < g.dim(); ++a) os << (a ? ", " : "") << x[a];
  os << ")";
  return os.str();
}

}  // namespace

double Kernel::value_sq(double dist2) const {
  if (q == 2.0) return dist2 / (2.0 * w);
  return std::pow(dist2, 0.5 * q) / (q * w);
}

Kernel make_kernel(double q, double eps, KernelVariant variant) {
  if (!(eps > 0.0)) throw InfConvError("kernel requires eps > 0");
  if (!(q >= 2.0)) throw InfConvError("kernel requires q >= 2");
  Kernel k;
  k.q = q;
  k.eps = eps;
  k.variant = variant;
  if (variant == KernelVariant::Degenerate) {
    if (q != 2.0) throw InfConvError("degenerate kernel requires q = 2");
    k.w = eps * eps;
  } else {
    if (!(q > 2.0)) throw InfConvError("singular kernel requires q > 2");
    k.w = std::pow(eps, q - 1.0);
  }
  return k;
}

void validate_kernel_for_exponent(const Kernel& k, double p_plus) {
  if (k.variant == KernelVariant::Singular && !(k.q > p_plus / (p_plus - 1.0))) {
    std::ostringstream os;
    os << "singular kernel needs q > p+/(p+ - 1) = " << p_plus / (p_plus - 1.0) << ", got q = "
       << k.q;
    throw InfConvError(os.str());
  }
}

double effective_radius(const Kernel& k, double osc) {
  if (!std::isfinite(osc) || osc < 0.0) throw InfConvError("oscillation must be finite and >= 0");
  return std::pow(k.q * k.w * osc, 1.0 / k.q);
}

double semiconcavity_constant(const Kernel& k, Normalization n) {
  return n == Normalization::Weight ? 1.0 / (2.0 * k.w) : 1.0 / (2.0 * k.eps);
}

bool InfConvResult::stencil_in_domain(std::size_t node) const {
  return stencil_in_mask(u.grid, domain, node);
}

std::size_t InfConvResult::domain_size() const {
  return static_cast<std::size_t>(std::count(domain.begin(), domain.end(), true));
}

InfConvResult inf_convolve(const ScalarField& u, const Kernel& k) {
  const Grid& g = u.grid;
  const auto [mn, mx] = std::minmax_element(u.values.begin(), u.values.end());
  if (!std::isfinite(*mn) || !std::isfinite(*mx)) throw InfConvError("field must be finite");
  const double r = effective_radius(k, *mx - *mn);

  InfConvResult res{u, u, std::vector<bool>(u.size(), false), k, r, semiconcavity_constant(k), {}};
  res.minimizers.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) res.domain[i] = g.distance_to_boundary(i) > r;
  if (res.domain_size() == 0) {
    throw InfConvError("shrunken domain is empty (r_eps = " + std::to_string(r) +
                       "); use a smaller eps");
  }

  const auto offsets = window_offsets(g, r);
  std::vector<double> kval(offsets.size());
  for (std::size_t o = 0; o < offsets.size(); ++o) kval[o] = k.value_sq(offsets[o].dist2);

  std::vector<std::pair<std::size_t, double>> cand;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!res.domain[i]) continue;
    cand.clear();
    double best = INFINITY;
    for (std::size_t o = 0; o < offsets.size(); ++o) {
      std::size_t y = 0;
      if (!shift(g, i, offsets[o].step, y)) continue;
      const double v = u[y] + kval[o];
      cand.emplace_back(y, v);
      best = std::min(best, v);
    }
    res.u_eps[i] = best;
    const double cut = best + kTieTolerance * (1.0 + std::abs(best));
    auto& ys = res.minimizers[i];
    for (const auto& [y, v] : cand) {
      if (v <= cut) ys.push_back(y);
    }
    std::sort(ys.begin(), ys.end());
  }
  return res;
}

std::vector<double> inf_convolve_unrestricted(const ScalarField& u, const Kernel& k,
                                              const std::vector<bool>& at) {
  const Grid& g = u.grid;
  std::vector<double> out(u.size(), INFINITY);
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!at[i]) continue;
    const Index xi = g.unflat(i);
    double best = INFINITY;
    for (std::size_t y = 0; y < u.size(); ++y) {
      const Index yi = g.unflat(y);
      Index step{};
      for (int a = 0; a < g.dim(); ++a) step[a] = yi[a] - xi[a];
      best = std::min(best, u[y] + k.value_sq(offset_dist2(g, step)));
    }
    out[i] = best;
  }
  return out;
}

std::vector<std::size_t> argmin_set(const ScalarField& u, const Kernel& k, std::size_t x,
                                    double tie_tol, double radius) {
  const Grid& g = u.grid;
  std::vector<std::pair<std::size_t, double>> cand;
  double best = INFINITY;
  for (const auto& off : window_offsets(g, radius)) {
    std::size_t y = 0;
    if (!shift(g, x, off.step, y)) continue;
    const double v = u[y] + k.value_sq(off.dist2);
    cand.emplace_back(y, v);
    best = std::min(best, v);
  }
  std::vector<std::size_t> ys;
  for (const auto& [y, v] : cand) {
    if (v <= best + tie_tol) ys.push_back(y);
  }
  std::sort(ys.begin(), ys.end());
  return ys;
}

SemiconcavityCheck check_semiconcave(const InfConvResult& r) {
  const Grid& g = r.u.grid;
  const int n = g.dim();
  SemiconcavityCheck c;
  c.max_eig = -INFINITY;
  for (std::size_t i = 0; i < r.u.size(); ++i) {
    if (!r.stencil_in_domain(i)) continue;
    Mat hess = hessian_fd(r.u_eps, i);
    for (int a = 0; a < n; ++a) hess[a][a] -= 2.0 * r.C;
    const double e = max_eigenvalue(hess, n);
    ++c.nodes_tested;
    if (e > c.max_eig) {
      c.max_eig = e;
      c.worst_node = i;
    }
  }
  c.holds = c.nodes_tested > 0 && c.max_eig <= 10.0 * g.h_max();
  return c;
}

Verdict check_gradient_bound(const InfConvResult& r) {
  const Grid& g = r.u.grid;
  const int n = g.dim();
  const double h = g.h_max();
  const double q = r.kernel.q;
  const double eps = r.kernel.eps;
  Verdict v;
  v.tolerance = 0.0;
  for (std::size_t i = 0; i < r.u.size(); ++i) {
    if (!r.stencil_in_domain(i)) continue;
    bool stable = true;
    const Index ijk = g.unflat(i);
    for (int a = 0; a < n && stable; ++a) {
      Index up = ijk, dn = ijk;
      ++up[a];
      --dn[a];
      const double fwd = (r.u_eps[g.flat(up)] - r.u_eps[i]) / g.h(a);
      const double bwd = (r.u_eps[i] - r.u_eps[g.flat(dn)]) / g.h(a);
      stable = std::abs(fwd - bwd) <= 10.0 * g.h(a) * r.C;
    }
    if (!stable) continue;
    const Vec du = gradient_fd(r.u_eps, i);
    const double gnorm = norm(du, n);
    const Vec x = g.point(i);
    // A lattice minimizer is only known to within half a cell diagonal; nodes
    // where that moves (d / eps)^{q-1} by more than the 10h slack are unresolved.
    const double cell = 0.5 * h * std::sqrt(static_cast<double>(n));
    bool resolved = true;
    std::vector<double> lhs;
    for (std::size_t y : r.minimizers[i]) {
      const Vec yp = g.point(y);
      double d2 = 0.0;
      for (int a = 0; a < n; ++a) d2 += (x[a] - yp[a]) * (x[a] - yp[a]);
      const double d = std::sqrt(d2);
      const double slope = (q - 1.0) * std::pow(d + cell, q - 2.0) / std::pow(eps, q - 1.0);
      resolved = resolved && slope * cell <= 10.0 * h;
      lhs.push_back(std::pow(d / eps, q - 1.0));
    }
    if (resolved) {
      for (double l : lhs) v.record(gnorm + 10.0 * h - l, "gradient bound at " + node_witness(g, i));
    }
    if (gnorm <= h) {
      v.record(10.0 * h - std::abs(r.u[i] - r.u_eps[i]),
               "zero-gradient identity at " + node_witness(g, i));
    }
  }
  return v.finalize();
}

Verdict check_upper_semicontinuity(const InfConvResult& r) {
  const Grid& g = r.u.grid;
  const int n = g.dim();
  const double h = g.h_max();
  const double reach = r.r_eps + h * std::sqrt(static_cast<double>(n));
  // A neighbour's minimizer is an eta-minimizer at x, eta bounded by twice the
  // kernel's Lipschitz constant on the enlarged window times the node spacing.
  const double lip = std::pow(reach, r.kernel.q - 1.0) / r.kernel.w;
  const double eta = 2.5 * h * std::sqrt(static_cast<double>(n)) * lip;

  auto spread = [&](std::size_t x, const std::vector<std::size_t>& ys) {
    const Vec xp = g.point(x);
    double m = 0.0;
    for (std::size_t y : ys) {
      const Vec yp = g.point(y);
      double d2 = 0.0;
      for (int a = 0; a < n; ++a) d2 += (xp[a] - yp[a]) * (xp[a] - yp[a]);
      m = std::max(m, std::sqrt(d2));
    }
    return m;
  };

  Verdict v;
  for (std::size_t i = 0; i < r.u.size(); ++i) {
    if (!r.stencil_in_domain(i)) continue;
    double nb_max = 0.0;
    const Index ijk = g.unflat(i);
    Index s{};
    auto rec = [&](auto&& self, int axis) -> void {
      if (axis == n) {
        Index k = ijk;
        for (int a = 0; a < n; ++a) k[a] += s[a];
        const std::size_t z = g.flat(k);
        nb_max = std::max(nb_max, spread(z, r.minimizers[z]));
        return;
      }
      for (int d = -1; d <= 1; ++d) {
        s[axis] = d;
        self(self, axis + 1);
      }
    };
    rec(rec, 0);
    const double tol = eta + kTieTolerance * (1.0 + std::abs(r.u_eps[i]));
    const double loose = spread(i, argmin_set(r.u, r.kernel, i, tol, reach));
    v.record(loose + 2.0 * h - nb_max, "minimizer spread at " + node_witness(g, i));
  }
  return v.finalize();
}

MollifiedField mollify_concave_part(const InfConvResult& r, int j) {
  const Grid& g = r.u.grid;
  const int n = g.dim();
  if (j <= 0) throw InfConvError("mollification index j must be positive");
  const double rho = 1.0 / j;
  if (rho < 2.0 * g.h_max()) {
    throw InfConvError("mollification radius 1/j must be at least 2h");
  }
  const auto offsets = window_offsets(g, rho, /*strict=*/true);
  std::vector<double> weight(offsets.size());
  double total = 0.0;
  for (std::size_t o = 0; o < offsets.size(); ++o) {
    weight[o] = std::exp(1.0 - 1.0 / (1.0 - offsets[o].dist2 / (rho * rho)));
    total += weight[o];
  }
  for (double& w : weight) w /= total;
  // Second moment of the mollifier: C|x|^2 * eta = C|x|^2 + C m2, so adding
  // C m2 back makes the result equal to u_eps * eta.
  double m2 = 0.0;
  for (std::size_t o = 0; o < offsets.size(); ++o) m2 += weight[o] * offsets[o].dist2;

  std::vector<double> phi(r.u.size());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    phi[i] = r.u_eps[i] - r.C * sq_norm_point(g.point(i), n);
  }

  MollifiedField out{r.u_eps, std::vector<bool>(r.u.size(), false), rho};
  for (std::size_t i = 0; i < r.u.size(); ++i) {
    if (!r.domain[i]) continue;
    double acc = 0.0;
    bool ok = true;
    for (std::size_t o = 0; o < offsets.size() && ok; ++o) {
      std::size_t y = 0;
      if (!shift(g, i, offsets[o].step, y) || !r.domain[y]) {
        ok = false;
      } else {
        acc += weight[o] * phi[y];
      }
    }
    if (!ok) continue;
    out.domain[i] = true;
    out.values[i] = acc + r.C * (sq_norm_point(g.point(i), n) + m2);
  }
  if (std::none_of(out.domain.begin(), out.domain.end(), [](bool b) { return b; })) {
    throw InfConvError("mollified field has empty support; increase j");
  }
  return out;
}

}  // namespace pxl
