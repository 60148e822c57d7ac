#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "fes/assembly.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fes;

TEST_CASE("whitney mass matrix on one triangle")
{
  Complex cx = fixtures::triangle();
  ElementSystem sys = trimmed_system(cx, 1);
  MirrorSystem mirrors = canonical_trimmed_mirrors(cx, 1);
  AssembledPair pair = assemble(sys, mirrors, 0);
  REQUIRE(pair.mass.rows() == 3);
  // area/12 * [[2,1,1],[1,2,1],[1,1,2]] with area = 1/2
  MatD expect(3, 3);
  expect << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  expect *= 1.0 / 24.0;
  CHECK((pair.mass - expect).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("derivative matrices: signed incidence for whitney forms")
{
  Complex cx = fixtures::two_triangles();
  ElementSystem sys = trimmed_system(cx, 1);
  MirrorSystem mirrors = canonical_trimmed_mirrors(cx, 1);
  AssembledPair p0 = assemble(sys, mirrors, 0);
  // D_0 is the vertex-to-edge signed incidence matrix
  MatQ delta0 = cx.coboundary_matrix(0);
  CHECK(p0.d == delta0);

  // D_1 D_0 = 0 exactly
  AssembledPair p1 = assemble(sys, mirrors, 1);
  MatQ z = p1.d * p0.d;
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j) CHECK(z(i, j) == 0);
}

TEST_CASE("mass matrices are symmetric positive definite")
{
  Complex cx = fixtures::square_grid(2);
  ElementSystem sys = trimmed_system(cx, 1);
  MirrorSystem mirrors = canonical_trimmed_mirrors(cx, 1);
  for (int k = 0; k <= 1; ++k) {
    AssembledPair pair = assemble(sys, mirrors, k);
    CHECK((pair.mass - pair.mass.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::LLT<MatD> llt(pair.mass);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("neumann eigenvalues of the unit square converge to (m^2+n^2) pi^2")
{
  const double pi2 = M_PI * M_PI;
  std::vector<double> err_first;
  for (int n : {4, 8}) {
    Complex cx = fixtures::square_grid(n);
    ElementSystem sys = trimmed_system(cx, 1);
    MirrorSystem mirrors = canonical_trimmed_mirrors(cx, 1);
    AssembledPair pair = assemble(sys, mirrors, 0);
    EigenResult eig = hodge_eigenvalues(pair, 3);
    REQUIRE(eig.zero_modes == 1);  // constants
    REQUIRE(eig.eigenvalues.size() == 3);
    if (n == 8) {
      CHECK(std::abs(eig.eigenvalues[0] - pi2) / pi2 <= 0.1);
      CHECK(std::abs(eig.eigenvalues[1] - pi2) / pi2 <= 0.1);
      CHECK(std::abs(eig.eigenvalues[2] - 2 * pi2) / (2 * pi2) <= 0.1);
    }
    err_first.push_back(std::abs(eig.eigenvalues[0] - pi2));
  }
  // roughly second order in h
  double order = std::log2(err_first[0] / err_first[1]);
  CHECK(order >= 1.7);
}

TEST_CASE("annulus: zero modes of d*d at k=1 count closed forms")
{
  Complex cx = fixtures::annulus();
  ElementSystem sys = trimmed_system(cx, 1);
  MirrorSystem mirrors = canonical_trimmed_mirrors(cx, 1);
  AssembledPair p0 = assemble(sys, mirrors, 0);
  AssembledPair p1 = assemble(sys, mirrors, 1);
  EigenResult eig = hodge_eigenvalues(p1, 5);
  // ker D_1 = exact 1-forms + harmonic: rank D_0 + b_1
  Eigen::Index expect = p1.space.dim() - rank(p1.d);
  CHECK(eig.zero_modes == static_cast<int>(expect));
  CHECK(expect == rank(p0.d) + 1);  // b_1 = 1

  // full Hodge Laplacian zero modes equal the Betti number
  CHECK(exact_betti(p0, p1) == 1);
  CHECK(full_hodge_zero_modes(p0, p1) == 1);
}

TEST_CASE("full hodge zero modes match betti numbers on fixtures")
{
  for (int p = 1; p <= 2; ++p) {
    Complex cx = fixtures::two_triangles();
    ElementSystem sys = trimmed_system(cx, p);
    MirrorSystem mirrors = canonical_trimmed_mirrors(cx, p);
    AssembledPair p0 = assemble(sys, mirrors, 0);
    AssembledPair p1 = assemble(sys, mirrors, 1);
    CHECK(exact_betti(p0, p1) == 0);
    CHECK(full_hodge_zero_modes(p0, p1) == 0);
  }
}

TEST_CASE("eigenvalues are invariant under an exact change of basis")
{
  Complex cx = fixtures::two_triangles();
  ElementSystem sys = trimmed_system(cx, 1);
  MirrorSystem mirrors = canonical_trimmed_mirrors(cx, 1);
  AssembledPair pair = assemble(sys, mirrors, 0);
  EigenResult ref = hodge_eigenvalues(pair, 3);

  // generic route (echelon null-space basis) must give the same spectrum
  AssembledPair gen = assemble_generic(sys, 0);
  EigenResult alt = hodge_eigenvalues(gen, 3);
  REQUIRE(ref.eigenvalues.size() == alt.eigenvalues.size());
  for (size_t i = 0; i < ref.eigenvalues.size(); ++i)
    CHECK(std::abs(ref.eigenvalues[i] - alt.eigenvalues[i]) <=
          1e-9 * std::max(1.0, std::abs(ref.eigenvalues[i])));
  CHECK(ref.zero_modes == alt.zero_modes);
}

TEST_CASE("count larger than the space dimension is clamped")
{
  Complex cx = fixtures::triangle();
  ElementSystem sys = trimmed_system(cx, 1);
  MirrorSystem mirrors = canonical_trimmed_mirrors(cx, 1);
  AssembledPair pair = assemble(sys, mirrors, 0);
  EigenResult eig = hodge_eigenvalues(pair, 100);
  CHECK(eig.count_clamped);
  CHECK(static_cast<int>(eig.eigenvalues.size()) + eig.zero_modes ==
        static_cast<int>(eig.dim));
}

TEST_CASE("commuting diagram report for canonical mirrors")
{
  Complex cx = fixtures::two_triangles();
  const int p = 1;
  ElementSystem sys = trimmed_system(cx, p);
  ElementSystem host = trimmed_system(cx, p + 1);
  MirrorSystem mirrors = canonical_trimmed_mirrors(cx, p);
  DiagramReport report = commuting_diagram_report(sys, mirrors, host);
  CHECK(report.d_commutes);
  CHECK(report.integrals_preserved);
  CHECK(report.cohomology_isomorphism);
}

TEST_CASE("corrupted DOF breaks commutation and is reported with a locus")
{
  // A pure sign flip of one weight leaves every mirror span unchanged, so
  // the interpolator is literally the same map; to corrupt a DOF one has
  // to move its weight out of the canonical weight space.  Replace one
  // edge integral weight (a constant) by a linear weight.
  Complex cx = fixtures::two_triangles();
  ElementSystem sys = trimmed_system(cx, 1);
  ElementSystem host = trimmed_system(cx, 2);
  MirrorSystem mirrors = canonical_trimmed_mirrors(cx, 1);
  MirrorSystem corrupted;
  bool first_edge = true;
  for (int ci = 0; ci < cx.num_cells(); ++ci)
    for (int k = 0; k <= cx.cell(ci).dim; ++k)
      for (const auto& l : mirrors.mirrors(ci, k)) {
        MirrorFunctional copy = l;
        if (cx.cell(ci).dim == 1 && k == 1 && first_edge) {
          for (auto& [s, w] : copy.wedge_weight)
            w = monomial_form(1, 0, Monomial{1}, Rational(1));  // weight t
          first_edge = false;
        }
        corrupted.add(ci, k, std::move(copy));
      }
  DiagramReport report = commuting_diagram_report(sys, corrupted, host);
  CHECK(!report.d_commutes);
  CHECK(report.detail.find("dI != Id") != std::string::npos);
}
