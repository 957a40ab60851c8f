#include <cmath>
#include <random>

#include "doctest.h"
#include "pxlap/fixtures.hpp"
#include "pxlap/spaces.hpp"

using namespace pxl;

namespace {

Grid unit(int dim, int n) {
  std::vector<Interval> b(dim, Interval{0.0, 1.0});
  std::vector<int> c(dim, n);
  return make_grid(dim, b, c);
}

// Piecewise smooth: a random Lipschitz part plus a random smooth wave, with a
// random amplitude so that both modular < 1 and modular > 1 occur.
ScalarField random_field(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> amp(0.05, 4.0);
  std::uniform_real_distribution<double> fr(0.5, 6.0);
  const double a = amp(rng);
  const double f = fr(rng);
  const ScalarField base = random_lipschitz_field(g, 2.0, rng());
  ScalarField u = sample(g, [&](const Vec& x) { return a * std::sin(f * (x[0] + 2 * x[1])); });
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += a * base[i];
  return u;
}

}  // namespace

TEST_CASE("modular") {
  const Grid g = unit(1, 50);
  const ExponentField p2 = parse_exponent("2", g);
  CHECK(modular(ScalarField(g, 0.0), p2) == 0.0);
  CHECK(modular(ScalarField(g, 1.0), parse_exponent("2+x1", g)) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(modular(ScalarField(g, 2.0), p2) - 4.0) <= 1e-12);
  ScalarField big(g, 1.0);
  big[7] = 1e200;
  CHECK_THROWS_AS(modular(big, p2), NumericalError);
}

TEST_CASE("luxemburg_norm") {
  const Grid g = unit(2, 16);
  const double tol = 1e-10;
  const NormReport one = luxemburg_norm(ScalarField(g, 1.0), parse_exponent("2+x1*x2", g), tol);
  CHECK(std::abs(one.norm - 1.0) <= tol);
  CHECK(one.bracket_width <= tol);

  const Grid g1 = unit(1, 20);
  const NormReport two = luxemburg_norm(ScalarField(g1, 2.0), parse_exponent("2", g1), tol);
  CHECK(std::abs(two.norm - 2.0) <= 2.0 * tol);
  CHECK(two.modular == doctest::Approx(4.0));

  const NormReport zero = luxemburg_norm(ScalarField(g, 0.0), parse_exponent("3", g), tol);
  CHECK(zero.norm == 0.0);
  CHECK(zero.bisection_iters == 0);
}

TEST_CASE("check_sandwich") {
  const Grid g1 = unit(1, 20);
  const SandwichCheck a = check_sandwich(ScalarField(g1, 1.0), parse_exponent("1.5+x1", g1));
  CHECK(a.lhs == doctest::Approx(1.0));
  CHECK(a.mid == doctest::Approx(1.0));
  CHECK(a.rhs == doctest::Approx(1.0));
  CHECK(a.holds);
  const SandwichCheck b = check_sandwich(ScalarField(g1, 2.0), parse_exponent("2", g1));
  CHECK(b.lhs == doctest::Approx(4.0));
  CHECK(b.mid == doctest::Approx(4.0));
  CHECK(b.rhs == doctest::Approx(4.0));
  CHECK(b.holds);
}

TEST_CASE("sandwich holds on random fields") {
  const Grid g = unit(2, 12);
  const char* exps[] = {"2+x1", "1.3+0.4*x2", "3+sin(4*x1)", "1.1+x1*x2", "2"};
  std::mt19937_64 rng(7);
  int checked = 0;
  for (const char* e : exps) {
    const ExponentField p = parse_exponent(e, g);
    for (int k = 0; k < 40; ++k) {
      const ScalarField u = random_field(g, rng);
      const SandwichCheck s = check_sandwich(u, p);
      CHECK(s.holds);
      // Independent recomputation of both sides.
      const double nrm = luxemburg_norm(u, p, 1e-12).norm;
      const double m = modular(u, p);
      const double lo = std::min(std::pow(nrm, p.p_plus()), std::pow(nrm, p.p_minus()));
      const double hi = std::max(std::pow(nrm, p.p_plus()), std::pow(nrm, p.p_minus()));
      CHECK(lo <= m + 1e-9 * (1 + m));
      CHECK(m <= hi + 1e-9 * (1 + m));
      ++checked;
    }
  }
  CHECK(checked == 200);
}

TEST_CASE("holder_pairing") {
  const Grid g1 = unit(1, 20);
  const ExponentField p2 = parse_exponent("2", g1);
  const HolderCheck z = holder_pairing(ScalarField(g1, 0.0), ScalarField(g1, 1.0), p2);
  CHECK(z.lhs == 0.0);
  CHECK(z.holds());
  const HolderCheck one = holder_pairing(ScalarField(g1, 1.0), ScalarField(g1, 1.0), p2);
  CHECK(one.lhs == doctest::Approx(1.0));
  CHECK(one.rhs == doctest::Approx(2.0).epsilon(1e-8));

  const Grid g = unit(2, 12);
  const ExponentField p = parse_exponent("2+x1", g);
  std::mt19937_64 rng(11);
  for (int k = 0; k < 30; ++k) {
    const ScalarField u = random_field(g, rng);
    const ScalarField v = random_field(g, rng);
    CHECK(holder_pairing(u, v, p).holds());
  }
}

TEST_CASE("sobolev_norm") {
  const Grid g = unit(2, 10);
  const ExponentField p = parse_exponent("2+x2", g);
  const double c = sobolev_norm(ScalarField(g, 3.0), p, 1e-12);
  CHECK(c == doctest::Approx(luxemburg_norm(ScalarField(g, 3.0), p, 1e-12).norm));
  CHECK(sobolev_norm(ScalarField(g, 0.0), p, 1e-12) == 0.0);

  const Grid g1 = unit(1, 1000);
  const ScalarField x = sample(g1, [](const Vec& y) { return y[0]; });
  CHECK(std::abs(sobolev_norm(x, parse_exponent("2", g1), 1e-12) - (1.0 / std::sqrt(3.0) + 1.0)) <=
        1e-6);
}

TEST_CASE("modular and norm convergence go together") {
  const Grid g = unit(2, 12);
  const ExponentField p = parse_exponent("1.5+x1", g);
  const ScalarField w = sample(g, [](const Vec& x) { return std::cos(3 * x[0]) + x[1]; });
  double last_m = INFINITY;
  double last_n = INFINITY;
  for (double k : {1.0, 10.0, 100.0, 1000.0, 1e7}) {
    ScalarField d(g, 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = w[i] / k;
    const double m = modular(d, p);
    const double n = luxemburg_norm(d, p, 1e-12).norm;
    CHECK(m < last_m);
    CHECK(n < last_n);
    last_m = m;
    last_n = n;
  }
  CHECK(last_m < 1e-6);
  CHECK(last_n < 1e-6);
}

TEST_CASE("constant exponent gives the classical norm") {
  const Grid g = unit(2, 10);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pe(1.2, 4.0);
  for (int k = 0; k < 50; ++k) {
    const double pc = pe(rng);
    const ExponentField p = ExponentField::constant(pc, g);
    const ScalarField u = random_field(g, rng);
    ScalarField a(g, 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) a[i] = std::pow(std::abs(u[i]), pc);
    const double classical = std::pow(integrate(a), 1.0 / pc);
    const double tol = 1e-10;
    CHECK(std::abs(luxemburg_norm(u, p, tol).norm - classical) <=
          std::max(tol, 1e-10) * std::max(1.0, classical));
  }
}

TEST_CASE("norm is homogeneous") {
  const Grid g = unit(2, 10);
  const ExponentField p = parse_exponent("1.9+0.5*cos(x1+x2)", g);
  std::mt19937_64 rng(5);
  const double tol = 1e-10;
  for (double c : {-3.0, 0.25, 7.5}) {
    const ScalarField u = random_field(g, rng);
    ScalarField cu = u;
    for (double& v : cu.values) v *= c;
    const double nu = luxemburg_norm(u, p, tol).norm;
    CHECK(std::abs(luxemburg_norm(cu, p, tol).norm - std::abs(c) * nu) <=
          2 * tol * std::abs(c) * nu);
  }
}
