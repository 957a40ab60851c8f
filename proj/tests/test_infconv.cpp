#include <cmath>

#include "doctest.h"
#include "pxlap/fixtures.hpp"
#include "pxlap/infconv.hpp"
#include "pxlap/verify.hpp"

using namespace pxl;

namespace {

Grid line(double lo, double hi, int n) { return make_grid(1, {{lo, hi}}, {n}); }
Grid square(int n) { return make_grid(2, {{0.0, 1.0}, {0.0, 1.0}}, {n, n}); }

ScalarField abs_field(const Grid& g) {
  return sample(g, [](const Vec& x) { return std::abs(x[0]); });
}

double huber(double x, double w) {
  const double a = std::abs(x);
  return a <= w ? x * x / (2 * w) : a - w / 2;
}

const Kernel kDeg = make_kernel(2.0, 0.1, KernelVariant::Degenerate);

}  // namespace

TEST_CASE("kernel construction") {
  CHECK(kDeg.w == doctest::Approx(0.01));
  const Kernel s = make_kernel(3.0, 0.1, KernelVariant::Singular);
  CHECK(s.w == doctest::Approx(0.01));
  CHECK_THROWS_AS(make_kernel(3.0, 0.1, KernelVariant::Degenerate), InfConvError);
  CHECK_THROWS_AS(make_kernel(2.0, 0.1, KernelVariant::Singular), InfConvError);
  CHECK_THROWS_AS(make_kernel(2.0, 0.0, KernelVariant::Degenerate), InfConvError);
  // p+ = 1.5 needs q > 3.
  CHECK_THROWS_AS(validate_kernel_for_exponent(s, 1.5), InfConvError);
  CHECK_NOTHROW(validate_kernel_for_exponent(make_kernel(3.5, 0.1, KernelVariant::Singular), 1.5));
  CHECK(s.value_sq(4.0) == doctest::Approx(8.0 / (3 * 0.01)));
}

TEST_CASE("effective_radius") {
  CHECK(effective_radius(kDeg, 0.0) == 0.0);
  CHECK(effective_radius(kDeg, 1.0) == doctest::Approx(std::sqrt(0.02)).epsilon(1e-14));
  CHECK(effective_radius(make_kernel(3.0, 0.1, KernelVariant::Singular), 1.0) ==
        doctest::Approx(std::cbrt(0.03)).epsilon(1e-14));
  CHECK(effective_radius(make_kernel(2.0, 0.01, KernelVariant::Degenerate), 1.0) <
        effective_radius(kDeg, 1.0));
  CHECK_THROWS_AS(effective_radius(kDeg, INFINITY), InfConvError);
}

TEST_CASE("semiconcavity_constant") {
  CHECK(semiconcavity_constant(kDeg) == doctest::Approx(50.0));
  CHECK(semiconcavity_constant(make_kernel(2.0, 1.0, KernelVariant::Degenerate)) ==
        doctest::Approx(0.5));
  CHECK(semiconcavity_constant(make_kernel(2.0, 1e6, KernelVariant::Degenerate)) < 1e-12);
  CHECK(semiconcavity_constant(kDeg, Normalization::Epsilon) == doctest::Approx(5.0));
}

TEST_CASE("envelope of a constant") {
  const Grid g = square(16);
  const InfConvResult r = inf_convolve(ScalarField(g, 2.5), kDeg);
  CHECK(r.r_eps == 0.0);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (!r.in_domain(i)) continue;
    CHECK(r.u_eps[i] == 2.5);
    CHECK(r.minimizers[i] == std::vector<std::size_t>{i});
    const auto y = argmin_set(r.u, kDeg, i, 1e-9, 0.2);
    CHECK(std::find(y.begin(), y.end(), i) != y.end());
  }
  const SemiconcavityCheck sc = check_semiconcave(r);
  CHECK(sc.holds);
  CHECK(sc.max_eig == doctest::Approx(-2 * r.C).epsilon(1e-9));
  CHECK(check_gradient_bound(r).passed);
  CHECK(check_upper_semicontinuity(r).passed);
}

TEST_CASE("envelope of |x| is the Huber function") {
  const Grid g = line(-1.0, 1.0, 2000);
  const ScalarField u = abs_field(g);
  const InfConvResult r = inf_convolve(u, kDeg);
  const double h = g.h(0);
  const double tol = std::max(h, h * h / (0.1 * 0.1));
  double worst = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (!r.in_domain(i)) continue;
    CHECK(r.u_eps[i] <= u[i]);
    CHECK_FALSE(r.minimizers[i].empty());
    worst = std::max(worst, std::abs(r.u_eps[i] - huber(g.point(i)[0], kDeg.w)));
    for (std::size_t y : r.minimizers[i])
      CHECK(std::abs(g.point(y)[0] - g.point(i)[0]) <= r.r_eps);
  }
  CHECK(worst <= tol);

  const std::size_t zero = g.nearest(Vec{0.0, 0, 0});
  CHECK(argmin_set(u, kDeg, zero, 1e-9, r.r_eps) == std::vector<std::size_t>{zero});
  CHECK(r.u_eps[zero] == 0.0);

  const std::size_t half = g.nearest(Vec{0.5, 0, 0});
  const auto y = argmin_set(u, kDeg, half, 1e-9 * (1 + r.u_eps[half]), r.r_eps);
  REQUIRE(y.size() == 1);
  CHECK(y[0] == g.nearest(Vec{0.49, 0, 0}));
  // |x - y| = eps^2 and (|x - y| / eps)^{q-1} = eps <= |Du_eps| = 1.
  CHECK(gradient_fd(r.u_eps, half)[0] == doctest::Approx(1.0).epsilon(1e-9));

  CHECK(check_semiconcave(r).holds);
  CHECK(check_gradient_bound(r).passed);
  CHECK(check_upper_semicontinuity(r).passed);
}

TEST_CASE("window minimum equals the global minimum") {
  const Grid g = square(32);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ScalarField u = random_lipschitz_field(g, 1.5, seed);
    for (const Kernel& k : {kDeg, make_kernel(2.0, 0.05, KernelVariant::Degenerate),
                            make_kernel(4.0, 0.2, KernelVariant::Singular)}) {
      const InfConvResult r = inf_convolve(u, k);
      const std::vector<double> full = inf_convolve_unrestricted(u, k, r.domain);
      for (std::size_t i = 0; i < g.node_count(); ++i)
        if (r.in_domain(i)) CHECK(full[i] == r.u_eps[i]);
    }
  }
  const Grid g1 = line(-1.0, 1.0, 2000);
  const ScalarField u1 = abs_field(g1);
  const InfConvResult r1 = inf_convolve(u1, kDeg);
  const std::vector<double> full1 = inf_convolve_unrestricted(u1, kDeg, r1.domain);
  for (std::size_t i = 0; i < g1.node_count(); ++i)
    if (r1.in_domain(i)) CHECK(full1[i] == r1.u_eps[i]);
}

TEST_CASE("translation equivariance") {
  // A lattice shift of field and box together leaves the nodal envelope unchanged.
  const Grid g = square(24);
  const double a = 5.0 / 24.0;
  const Grid gs = make_grid(2, {{a, 1 + a}, {-a, 1 - a}}, {24, 24});
  const auto f = [](const Vec& x) { return std::abs(x[0] - 0.4) + 0.5 * std::sin(3 * x[1]); };
  const ScalarField u = sample(g, f);
  const ScalarField us = sample(gs, [&](const Vec& x) { return f(Vec{x[0] - a, x[1] + a, 0}); });
  const InfConvResult r = inf_convolve(u, kDeg);
  const InfConvResult rs = inf_convolve(us, kDeg);
  CHECK(r.domain == rs.domain);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (!r.in_domain(i)) continue;
    CHECK(r.u_eps[i] == doctest::Approx(rs.u_eps[i]).epsilon(1e-14));
    CHECK(r.minimizers[i] == rs.minimizers[i]);
  }
}

TEST_CASE("envelopes increase as eps decreases") {
  const Grid g = square(40);
  const ScalarField u = random_lipschitz_field(g, 1.0, 9);
  std::vector<InfConvResult> rs;
  for (double eps : {0.2, 0.1, 0.05, 0.025})
    rs.push_back(inf_convolve(u, make_kernel(2.0, eps, KernelVariant::Degenerate)));
  double last_gap = INFINITY;
  for (std::size_t k = 0; k < rs.size(); ++k) {
    double gap = 0.0;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      if (!rs[0].in_domain(i)) continue;
      CHECK(rs[k].u_eps[i] <= u[i]);
      if (k > 0) CHECK(rs[k].u_eps[i] >= rs[k - 1].u_eps[i] - 1e-12);
      gap = std::max(gap, u[i] - rs[k].u_eps[i]);
    }
    CHECK(gap <= last_gap);
    last_gap = gap;
  }
  CHECK(last_gap < 0.05);
}

TEST_CASE("semiconcavity across fields") {
  const Grid g = square(32);
  const Vec c = domain_center(g);
  const ScalarField fields[] = {
      ScalarField(g, 1.0), cone_field(g, c, 1.0), cone_field(g, c, -1.0),
      random_lipschitz_field(g, 1.0, 4), quadratic_field(g, Vec{1, 0.5, 0}, c, 0.5, 1.0)};
  for (const ScalarField& u : fields) {
    for (const Kernel& k : {kDeg, make_kernel(4.0, 0.15, KernelVariant::Singular)}) {
      const InfConvResult r = inf_convolve(u, k);
      CHECK(check_semiconcave(r).holds);
      CHECK(check_upper_semicontinuity(r).passed);
    }
  }
}

TEST_CASE("gradient bound on 2D fields") {
  const Grid g = square(48);
  const Vec c = domain_center(g);
  CHECK(check_gradient_bound(inf_convolve(cone_field(g, c, 1.0), kDeg)).passed);
  CHECK(check_gradient_bound(
            inf_convolve(planes_field(g, 1.0, 3), make_kernel(2.0, 0.07, KernelVariant::Degenerate)))
            .passed);
}

TEST_CASE("shrunken domain must be nonempty") {
  const Grid g = square(8);
  const ScalarField u = cone_field(g, domain_center(g), 1.0);
  CHECK_THROWS_AS(inf_convolve(u, make_kernel(2.0, 2.0, KernelVariant::Degenerate)),
                  InfConvError);
}

TEST_CASE("mollified envelopes") {
  SUBCASE("constant stays constant") {
    const Grid g = square(32);
    const InfConvResult r = inf_convolve(ScalarField(g, -0.75), kDeg);
    for (int j : {4, 8, 16}) {
      const MollifiedField m = mollify_concave_part(r, j);
      int count = 0;
      for (std::size_t i = 0; i < g.node_count(); ++i) {
        if (!m.domain[i]) continue;
        ++count;
        CHECK(m.values[i] == doctest::Approx(-0.75).epsilon(1e-12));
      }
      CHECK(count > 0);
    }
  }
  SUBCASE("distance to the envelope is at most C / j^2") {
    const Grid g = line(-1.0, 1.0, 2000);
    const InfConvResult r = inf_convolve(abs_field(g), kDeg);
    for (int j : {16, 64, 250}) {
      const MollifiedField m = mollify_concave_part(r, j);
      double worst = 0.0;
      for (std::size_t i = 0; i < g.node_count(); ++i)
        if (m.domain[i]) worst = std::max(worst, std::abs(m.values[i] - r.u_eps[i]));
      CHECK(worst <= r.C / (double(j) * j));
    }
  }
  SUBCASE("Hessian bounded by 1/w") {
    const Grid g = square(48);
    const double h = g.h_max();
    for (const ScalarField& u :
         {cone_field(g, domain_center(g), 1.0), random_lipschitz_field(g, 1.0, 12)}) {
      const InfConvResult r = inf_convolve(u, kDeg);
      const MollifiedField m = mollify_concave_part(r, 8);
      int tested = 0;
      for (std::size_t i = 0; i < g.node_count(); ++i) {
        if (!stencil_in_mask(g, m.domain, i)) continue;
        ++tested;
        CHECK(max_eigenvalue(hessian_fd(m.values, i), 2) <= 1.0 / kDeg.w + 10 * h);
      }
      CHECK(tested > 0);
    }
  }
  SUBCASE("radius below 2h is rejected") {
    const Grid g = square(16);
    const InfConvResult r = inf_convolve(ScalarField(g, 0.0), kDeg);
    CHECK_THROWS_AS(mollify_concave_part(r, 10), InfConvError);
    CHECK_THROWS_AS(mollify_concave_part(r, 0), InfConvError);
  }
}

TEST_CASE("envelopes of supersolutions stay supersolutions") {
  const Grid g = square(32);
  const ExponentField p = parse_exponent("3", g);
  const ScalarField u = cone_field(g, domain_center(g), -1.0);
  const InfConvResult r = inf_convolve(u, kDeg);
  ViscosityTestOptions opts;
  opts.valid = r.domain;
  opts.tol = default_tolerances(r.u_eps).viscosity;
  const Verdict v = test_viscosity_supersolution(r.u_eps, p, opts);
  CHECK(v.n_tests > 0);
  CHECK(v.passed);
}
