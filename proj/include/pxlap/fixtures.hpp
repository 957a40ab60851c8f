// Named test fields shared by the tests, the acceptance suite and the CLI.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pxlap/exponent.hpp"
#include "pxlap/grid.hpp"

namespace pxl {

/// Centre of the box.
Vec domain_center(const Grid& g);

ScalarField constant_field(const Grid& g, double c);
ScalarField affine_field(const Grid& g, const Vec& slope, double offset);
/// sign * |x - center|.
ScalarField cone_field(const Grid& g, const Vec& center, double sign);
/// Inf-convolution of |x - center| with |.|^2 / (2w): quadratic inside |x| <= w.
ScalarField huber_field(const Grid& g, const Vec& center, double w);
/// affine + sign * alpha |x - center|^2.
ScalarField quadratic_field(const Grid& g, const Vec& slope, const Vec& center, double alpha,
                            double sign);
/// min (sign < 0) or max (sign > 0) of a few planes through random points.
ScalarField planes_field(const Grid& g, double sign, std::uint64_t seed);
/// Piecewise-linear interpolation of random nodal values on a coarse lattice,
/// scaled to Lipschitz constant about `lip`.
ScalarField random_lipschitz_field(const Grid& g, double lip, std::uint64_t seed);
/// Solution of the Dirichlet problem with smooth boundary data
/// sum_a sin(freq (x_a + phase_a)) drawn from the seed.
ScalarField solved_field(const Grid& g, const ExponentField& p, std::uint64_t seed);

struct Fixture {
  std::string name;
  ScalarField u;
  /// Whether the field is designed to be a supersolution.
  bool supersolution = false;
};

/// Builds one of: constant, affine, cone, neg_cone, huber, concave, convex,
/// min_planes, max_planes, random_lipschitz, solve. Throws std::invalid_argument
/// for other names.
Fixture make_fixture(const std::string& name, const Grid& g, const ExponentField& p,
                     std::uint64_t seed);

/// The agreement suite: two converged solves, constant, affine, neg_cone,
/// cone, concave, convex, min_planes, max_planes.
std::vector<Fixture> fixture_suite(const Grid& g, const ExponentField& p, std::uint64_t seed);

std::vector<std::string> fixture_names();

}  // namespace pxl
