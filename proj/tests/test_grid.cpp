#include <cmath>

#include "doctest.h"
#include "pxlap/grid.hpp"

using namespace pxl;

namespace {

Grid unit_grid(int dim, int n) {
  std::vector<Interval> b(dim, Interval{0.0, 1.0});
  std::vector<int> c(dim, n);
  return make_grid(dim, b, c);
}

std::size_t node_at(const Grid& g, Index k) { return g.flat(k); }

}  // namespace

TEST_CASE("make_grid spacing and counts") {
  const Grid g1 = make_grid(1, {{0.0, 1.0}}, {10});
  CHECK(g1.h(0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(g1.node_count() == 11);

  const Grid g2 = make_grid(2, {{0.0, 1.0}, {0.0, 1.0}}, {4, 4});
  CHECK(g2.node_count() == 25);
  int boundary = 0;
  for (std::size_t i = 0; i < g2.node_count(); ++i) boundary += g2.is_boundary(i);
  CHECK(boundary == 16);
}

TEST_CASE("make_grid rejects bad input") {
  CHECK_THROWS_AS(make_grid(1, {{0.0, 1.0}}, {2}), GridError);
  CHECK_THROWS_AS(make_grid(1, {{1.0, 1.0}}, {8}), GridError);
  CHECK_THROWS_AS(make_grid(1, {{1.0, 0.0}}, {8}), GridError);
  CHECK_THROWS_AS(make_grid(2, {{0.0, 1.0}}, {8}), GridError);
  CHECK_THROWS_AS(make_grid(4, {{0, 1}, {0, 1}, {0, 1}, {0, 1}}, {4, 4, 4, 4}), GridError);
}

TEST_CASE("flat and unflat round trip") {
  const Grid g = make_grid(3, {{0, 1}, {-1, 2}, {0, 0.5}}, {4, 5, 6});
  for (std::size_t i = 0; i < g.node_count(); ++i) CHECK(g.flat(g.unflat(i)) == i);
  CHECK(g.unflat(1)[0] == 1);  // x1 varies fastest
  const Vec p = g.point(Index{4, 5, 6});
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(2.0));
  CHECK(p[2] == doctest::Approx(0.5));
  CHECK(g.nearest(Vec{0.26, 0.0, 0.2}) == g.flat(Index{1, 2, 2}));
}

TEST_CASE("gradient_fd") {
  const Grid g = unit_grid(2, 10);
  const std::size_t mid = node_at(g, {5, 5, 0});
  const Vec zero = gradient_fd(ScalarField(g, 3.0), mid);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);

  const Vec d1 = gradient_fd(sample(g, [](const Vec& x) { return x[0]; }), node_at(g, {3, 7, 0}));
  CHECK(d1[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(d1[1]) < 1e-14);

  const Vec d2 = gradient_fd(sample(g, [](const Vec& x) { return x[0] * x[0]; }), mid);
  CHECK(d2[0] == doctest::Approx(1.0).epsilon(1e-13));

  CHECK_THROWS_AS(gradient_fd(ScalarField(g, 0.0), 0), GridError);
}

TEST_CASE("hessian_fd") {
  const Grid g = unit_grid(2, 10);
  const std::size_t mid = node_at(g, {4, 6, 0});
  const Mat z = hessian_fd(sample(g, [](const Vec& x) { return 2 * x[0] - x[1]; }), mid);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) CHECK(std::abs(z[a][b]) < 1e-10);

  const Mat id = hessian_fd(
      sample(g, [](const Vec& x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); }), mid);
  CHECK(id[0][0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(id[1][1] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(id[0][1]) < 1e-10);

  const Mat xy = hessian_fd(sample(g, [](const Vec& x) { return x[0] * x[1]; }), mid);
  CHECK(xy[0][1] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(xy[1][0] == xy[0][1]);
  CHECK(std::abs(xy[0][0]) < 1e-10);
  CHECK(std::abs(xy[1][1]) < 1e-10);

  CHECK_THROWS_AS(hessian_fd(ScalarField(g, 0.0), node_at(g, {0, 3, 0})), GridError);
}

TEST_CASE("finite differences are exact on quadratics") {
  const Grid g = make_grid(3, {{-1, 1}, {0, 2}, {0.5, 1}}, {6, 7, 5});
  const auto q = [](const Vec& x) {
    return 1.0 + 2 * x[0] - x[1] + 0.5 * x[2] + 3 * x[0] * x[0] - x[0] * x[1] + 2 * x[1] * x[2] -
           x[2] * x[2];
  };
  const ScalarField u = sample(g, q);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (!g.is_interior(i)) continue;
    const Vec x = g.point(i);
    const Vec d = gradient_fd(u, i);
    CHECK(d[0] == doctest::Approx(2 + 6 * x[0] - x[1]).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(-1 - x[0] + 2 * x[2]).epsilon(1e-12));
    CHECK(d[2] == doctest::Approx(0.5 + 2 * x[1] - 2 * x[2]).epsilon(1e-12));
    const Mat h = hessian_fd(u, i);
    CHECK(h[0][0] == doctest::Approx(6).epsilon(1e-9));
    CHECK(h[0][1] == doctest::Approx(-1).epsilon(1e-9));
    CHECK(h[1][2] == doctest::Approx(2).epsilon(1e-9));
    CHECK(h[2][2] == doctest::Approx(-2).epsilon(1e-9));
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) CHECK(h[a][b] == h[b][a]);
  }
}

TEST_CASE("gradient_full uses one-sided differences on faces") {
  const Grid g = unit_grid(2, 8);
  const ScalarField u = sample(g, [](const Vec& x) { return x[0] * x[0] + 3 * x[1]; });
  const Vec d = gradient_full(u, 0);
  CHECK(std::abs(d[0]) < 1e-12);
  CHECK(d[1] == doctest::Approx(3.0));
}

TEST_CASE("integrate") {
  const Grid g1 = make_grid(1, {{0.0, 1.0}}, {37});
  CHECK(integrate(ScalarField(g1, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(integrate(sample(g1, [](const Vec& x) { return x[0]; })) ==
        doctest::Approx(0.5).epsilon(1e-12));
  const Grid g100 = make_grid(1, {{0.0, 1.0}}, {100});
  CHECK(std::abs(integrate(sample(g100, [](const Vec& x) { return x[0] * x[0]; })) - 1.0 / 3.0) <=
        2e-5);
  const Grid g2 = make_grid(2, {{0, 2}, {0, 3}}, {5, 6});
  CHECK(integrate(ScalarField(g2, 1.0)) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("bump functions") {
  const Grid g = unit_grid(2, 20);
  const Vec c{0.5, 0.4, 0.0};
  const TestFunction psi = make_bump(g, c, 0.3, 1.7);
  CHECK(psi.value(c) == 1.7);
  CHECK(psi.value(Vec{0.8, 0.4, 0.0}) == 0.0);
  CHECK(psi.value(Vec{0.5, 0.7, 0.0}) == 0.0);
  const Vec d = psi.gradient(c);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 0.0);
  CHECK_FALSE(psi.in_support(Vec{0.9, 0.9, 0.0}));
  CHECK_THROWS_AS(make_bump(g, c, 0.45, 1.0), GridError);
  CHECK_THROWS_AS(make_bump(g, c, 0.0, 1.0), GridError);
  CHECK_THROWS_AS(make_bump(g, c, 0.2, -1.0), GridError);
}

TEST_CASE("bump gradients integrate to zero") {
  // Trapezoid error on a smooth compactly supported integrand decays faster
  // than any power of h; 1e-10 needs roughly 150 nodes across the radius.
  const Grid g = unit_grid(2, 512);
  const TestFunction psi = make_bump(g, Vec{0.45, 0.55, 0.0}, 0.3, 1.0);
  for (int a = 0; a < 2; ++a) {
    const ScalarField da = sample(g, [&](const Vec& x) { return psi.gradient(x)[a]; });
    CHECK(std::abs(integrate(da)) < 1e-10);
  }
  // Analytic gradient agrees with a centred difference of the profile.
  const Vec x{0.52, 0.61, 0.0};
  const double e = 1e-6;
  const double fd = (psi.value(Vec{x[0] + e, x[1], 0}) - psi.value(Vec{x[0] - e, x[1], 0})) / (2 * e);
  CHECK(psi.gradient(x)[0] == doctest::Approx(fd).epsilon(1e-6));
  CHECK(psi.l1_norm(g) > 0.0);
}

TEST_CASE("stencil_in_mask") {
  const Grid g = unit_grid(2, 6);
  std::vector<bool> mask(g.node_count(), true);
  const std::size_t mid = node_at(g, {3, 3, 0});
  CHECK(stencil_in_mask(g, {}, mid));
  CHECK_FALSE(stencil_in_mask(g, {}, 0));
  mask[node_at(g, {4, 4, 0})] = false;
  CHECK_FALSE(stencil_in_mask(g, mask, mid));
  CHECK(stencil_in_mask(g, mask, node_at(g, {2, 2, 0})));
}

TEST_CASE("small linear algebra") {
  Mat m{};
  m[0] = {2.0, 1.0, 0.0};
  m[1] = {1.0, 2.0, 0.0};
  m[2] = {0.0, 0.0, -1.0};
  CHECK(max_eigenvalue(m, 3) == doctest::Approx(3.0));
  CHECK(max_eigenvalue(m, 1) == doctest::Approx(2.0));
  CHECK(trace(m, 3) == doctest::Approx(3.0));
  const Vec v = mat_vec(m, Vec{1, 0, 0}, 2);
  CHECK(v[1] == 1.0);
  CHECK(norm(Vec{3, 4, 0}, 2) == 5.0);
}
