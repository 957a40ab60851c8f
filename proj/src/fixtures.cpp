#include "pxlap/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "pxlap/solver.hpp"
#include "pxlap/spaces.hpp"

namespace pxl {

Vec domain_center(const Grid& g) {
  Vec c{};
  for (int a = 0; a < g.dim(); ++a) c[a] = 0.5 * (g.lo(a) + g.hi(a));
  return c;
}

ScalarField constant_field(const Grid& g, double c) { return ScalarField(g, c); }

ScalarField affine_field(const Grid& g, const Vec& slope, double offset) {
  const int n = g.dim();
  return sample(g, [&](const Vec& x) { return offset + dot(slope, x, n); });
}

ScalarField cone_field(const Grid& g, const Vec& center, double sign) {
  const int n = g.dim();
  return sample(g, [&](const Vec& x) {
    Vec d{};
    for (int a = 0; a < n; ++a) d[a] = x[a] - center[a];
    return sign * norm(d, n);
  });
}

ScalarField huber_field(const Grid& g, const Vec& center, double w) {
  const int n = g.dim();
  return sample(g, [&](const Vec& x) {
    Vec d{};
    for (int a = 0; a < n; ++a) d[a] = x[a] - center[a];
    const double r = norm(d, n);
    return r <= w ? r * r / (2.0 * w) : r - 0.5 * w;
  });
}

ScalarField quadratic_field(const Grid& g, const Vec& slope, const Vec& center, double alpha,
                            double sign) {
  const int n = g.dim();
  return sample(g, [&](const Vec& x) {
    double r2 = 0.0;
    for (int a = 0; a < n; ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
    return dot(slope, x, n) + sign * alpha * r2;
  });
}

ScalarField planes_field(const Grid& g, double sign, std::uint64_t seed) {
  const int n = g.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  // Planes of unit slope through points near the centre, so that every
  // plane is active somewhere in the box.
  const Vec c = domain_center(g);
  std::vector<std::pair<Vec, Vec>> planes;
  const int count = 3 + n;
  for (int k = 0; k < count; ++k) {
    Vec dir{};
    for (int a = 0; a < n; ++a) dir[a] = unit(rng);
    const double len = norm(dir, n);
    for (int a = 0; a < n; ++a) dir[a] /= len;
    Vec through{};
    for (int a = 0; a < n; ++a) through[a] = c[a] + 0.1 * (g.hi(a) - g.lo(a)) * unit(rng);
    planes.emplace_back(dir, through);
  }
  return sample(g, [&](const Vec& x) {
    double best = sign > 0.0 ? -INFINITY : INFINITY;
    for (const auto& [dir, through] : planes) {
      double v = 0.0;
      for (int a = 0; a < n; ++a) v += dir[a] * (x[a] - through[a]);
      // Planes enter with slope sign * dir so that max gives a convex field.
      v *= sign > 0.0 ? 1.0 : -1.0;
      best = sign > 0.0 ? std::max(best, v) : std::min(best, v);
    }
    return best;
  });
}

ScalarField random_lipschitz_field(const Grid& g, double lip, std::uint64_t seed) {
  const int n = g.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int m = 6;  // coarse cells per axis
  Index dims{1, 1, 1};
  for (int a = 0; a < n; ++a) dims[a] = m + 1;
  std::vector<double> coarse(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  double coarse_h = INFINITY;
  for (int a = 0; a < n; ++a) coarse_h = std::min(coarse_h, (g.hi(a) - g.lo(a)) / m);
  for (double& v : coarse) v = 0.5 * lip * coarse_h * unit(rng);
  auto at = [&](const Index& k) { return coarse[(k[2] * dims[1] + k[1]) * dims[0] + k[0]]; };
  return sample(g, [&](const Vec& x) {
    // Multilinear interpolation.
    Index base{};
    Vec t{};
    for (int a = 0; a < n; ++a) {
      const double s = (x[a] - g.lo(a)) / (g.hi(a) - g.lo(a)) * m;
      base[a] = std::clamp(static_cast<int>(std::floor(s)), 0, m - 1);
      t[a] = s - base[a];
    }
    double v = 0.0;
    for (int corner = 0; corner < (1 << n); ++corner) {
      Index k = base;
      double wgt = 1.0;
      for (int a = 0; a < n; ++a) {
        const int bit = (corner >> a) & 1;
        k[a] += bit;
        wgt *= bit ? t[a] : 1.0 - t[a];
      }
      v += wgt * at(k);
    }
    return v;
  });
}

ScalarField solved_field(const Grid& g, const ExponentField& p, std::uint64_t seed) {
  const int n = g.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(1.0, 3.0);
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  Vec f{};
  Vec ph{};
  for (int a = 0; a < n; ++a) {
    f[a] = freq(rng);
    ph[a] = phase(rng);
  }
  const ScalarField boundary = sample(g, [&](const Vec& x) {
    double v = x[0];
    for (int a = 0; a < n; ++a) v += 0.5 * std::sin(f[a] * x[a] + ph[a]);
    return v;
  });
  SolveOptions opts;
  opts.tol = 1e-10;
  SolveReport r = solve_dirichlet(p, boundary, opts);
  if (!r.converged) throw NumericalError("fixture solve did not converge: " + r.diagnostic);
  return r.u;
}

std::vector<std::string> fixture_names() {
  return {"constant",   "affine",     "cone",       "neg_cone",         "huber", "concave",
          "convex",     "min_planes", "max_planes", "random_lipschitz", "solve"};
}

Fixture make_fixture(const std::string& name, const Grid& g, const ExponentField& p,
                     std::uint64_t seed) {
  const Vec c = domain_center(g);
  // Slope chosen so that the gradient of the quadratics stays away from zero
  // on boxes of unit size.
  const Vec slope{1.5, 0.5, 0.25};
  if (name == "constant") return {name, constant_field(g, 1.0), true};
  if (name == "affine") {
    // Unit slope: |Du| = 1 kills the log term, so the field solves the equation
    // for every exponent.
    Vec unit{0.6, 0.8, 0.0};
    if (g.dim() == 1) unit = {1.0, 0.0, 0.0};
    return {name, affine_field(g, unit, 0.25), true};
  }
  if (name == "cone") return {name, cone_field(g, c, 1.0), false};
  if (name == "neg_cone") return {name, cone_field(g, c, -1.0), true};
  if (name == "huber") return {name, huber_field(g, c, 0.01), false};
  if (name == "concave") return {name, quadratic_field(g, slope, c, 0.5, -1.0), true};
  if (name == "convex") return {name, quadratic_field(g, slope, c, 0.5, 1.0), false};
  if (name == "min_planes") return {name, planes_field(g, -1.0, seed), true};
  if (name == "max_planes") return {name, planes_field(g, 1.0, seed), false};
  if (name == "random_lipschitz") return {name, random_lipschitz_field(g, 1.0, seed), false};
  if (name == "solve") return {name, solved_field(g, p, seed), true};
  throw std::invalid_argument("unknown fixture '" + name + "'");
}

std::vector<Fixture> fixture_suite(const Grid& g, const ExponentField& p, std::uint64_t seed) {
  std::vector<Fixture> out;
  Fixture s1 = make_fixture("solve", g, p, seed);
  s1.name = "solve_a";
  out.push_back(std::move(s1));
  Fixture s2 = make_fixture("solve", g, p, seed + 1);
  s2.name = "solve_b";
  out.push_back(std::move(s2));
  for (const char* name : {"constant", "affine", "neg_cone", "cone", "concave", "convex",
                           "min_planes", "max_planes"}) {
    out.push_back(make_fixture(name, g, p, seed));
  }
  return out;
}

}  // namespace pxl
