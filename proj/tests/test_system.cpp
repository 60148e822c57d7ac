#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fes/system.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fes;
using fixtures::pt;

namespace {

int tri_cell(const Complex& cx)
{
  return cx.cell_of_simplex(cx.find_simplex({0, 1, 2}));
}

// Full polynomial system of order p - k per degree (compatible for p >= 1).
ElementSystem poly_by_degree(const Complex& cx, int p)
{
  return polynomial_system(cx, [&](int ci, int k) { return p - k; });
}

}  // namespace

TEST_CASE("trimmed dimensions per cell on a triangle")
{
  Complex cx = fixtures::triangle();
  int t = tri_cell(cx);

  ElementSystem p1 = trimmed_system(cx, 1);
  CHECK(p1.space_dim(t, 0) == 3);
  CHECK(p1.space_dim(t, 1) == 3);
  CHECK(p1.space_dim(t, 2) == 1);

  ElementSystem p2 = trimmed_system(cx, 2);
  CHECK(p2.space_dim(t, 0) == 6);
  CHECK(p2.space_dim(t, 1) == 8);
  CHECK(p2.space_dim(t, 2) == 3);
}

TEST_CASE("variable-order trimmed system (nesting)")
{
  Complex cx = fixtures::triangle();
  int t = tri_cell(cx);
  MeshOrders orders;
  orders.default_order = 1;
  orders.per_cell[cx.cell(t).id] = 2;
  ElementSystem sys = trimmed_system(cx, orders);
  // P2 functions whose edge traces are affine.  The three quadratic-trace
  // conditions are independent on P2 and Lambda_2^0 has no interior
  // bubble, so the null space is 3-dimensional (the P1 hat functions).
  CHECK(sys.space_dim(t, 0) == 3);
  GlobalSpace gs = global_space(sys, cx.all_cells(), 0);
  Eigen::Index a0_sum = 0;
  for (int ci = 0; ci < cx.num_cells(); ++ci)
    a0_sum += sys.kernel_coords(ci, 0).cols();
  CHECK(gs.dim() == a0_sum);  // kernel count consistency for the value above

  // monotonicity violations are rejected
  MeshOrders bad;
  bad.default_order = 2;
  bad.per_cell[cx.cell(t).id] = 1;
  CHECK_THROWS_AS(trimmed_system(cx, bad), OrderNotMonotone);
}

TEST_CASE("polynomial systems and degree-monotonicity validation")
{
  Complex cx = fixtures::triangle();
  int t = tri_cell(cx);
  ElementSystem sys = poly_by_degree(cx, 1);
  CHECK(sys.space_dim(t, 0) == 3);

  // pi decreasing into subcells is rejected: order 2 on the triangle,
  // order 1 on edges
  CHECK_THROWS_AS(polynomial_system(cx,
                                    [&](int ci, int k) {
                                      return cx.cell(ci).dim == 2 ? 2 : 1;
                                    }),
                  ConditionViolated);

  // constant order 1 for every k: valid element system with dims (3, 6, 3)
  ElementSystem flat = polynomial_system(cx, [](int, int) { return 1; });
  CHECK(flat.space_dim(t, 0) == 3);
  CHECK(flat.space_dim(t, 1) == 6);
  CHECK(flat.space_dim(t, 2) == 3);
}

TEST_CASE("restriction matrices")
{
  Complex cx = fixtures::triangle();
  int t = tri_cell(cx);
  ElementSystem sys = trimmed_system(cx, 1);

  // restriction to itself is the identity
  MatQ self = sys.restriction(t, t, 1);
  CHECK(self == MatQ::Identity(3, 3));

  // Whitney 1-forms restricted to an edge: exactly one basis form
  // survives (the edge's own), i.e. one nonzero row entry per column
  int e = cx.cell_of_simplex(cx.find_simplex({0, 1}));
  MatQ r = sys.restriction(t, e, 1);
  REQUIRE(r.rows() == 1);
  REQUIRE(r.cols() == 3);
  int nonzero = 0;
  for (Eigen::Index j = 0; j < 3; ++j)
    if (r(0, j) != 0) ++nonzero;
  CHECK(nonzero == 1);

  // functoriality: triangle -> edge -> vertex equals triangle -> vertex
  int v = cx.cell_of_simplex(cx.find_simplex({0}));
  MatQ te = sys.restriction(t, e, 0);
  MatQ ev = sys.restriction(e, v, 0);
  MatQ tv = sys.restriction(t, v, 0);
  CHECK(ev * te == tv);
}

TEST_CASE("kernel spaces A_0")
{
  Complex cx = fixtures::triangle();
  int t = tri_cell(cx);
  CHECK(trimmed_system(cx, 1).kernel_coords(t, 0).cols() == 0);
  CHECK(trimmed_system(cx, 2).kernel_coords(t, 0).cols() == 0);
  CHECK(trimmed_system(cx, 3).kernel_coords(t, 0).cols() == 1);  // cubic bubble
  // top degree: no boundary condition on volume forms
  ElementSystem p2 = trimmed_system(cx, 2);
  CHECK(p2.kernel_coords(t, 2).cols() == p2.space_dim(t, 2));
}

TEST_CASE("global spaces")
{
  Complex cx = fixtures::two_triangles();
  ElementSystem sys = trimmed_system(cx, 1);
  GlobalSpace gs1 = global_space(sys, cx.all_cells(), 1);
  CHECK(gs1.dim() == 5);  // one Whitney form per edge

  GlobalSpace gs0 = global_space(sys, cx.all_cells(), 0);
  CHECK(gs0.dim() == 4);

  // single cell: A^k(subcomplex of T) is isomorphic to A^k(T)
  Complex tri = fixtures::triangle();
  ElementSystem tsys = trimmed_system(tri, 2);
  int t = tri_cell(tri);
  GlobalSpace cell_space = global_space(tsys, tri.subcells(t), 1);
  CHECK(cell_space.dim() == tsys.space_dim(t, 1));

  // Whitney 0-forms on the boundary of a triangle: dim 3
  GlobalSpace bnd =
      global_space(tsys, tri.boundary_complex_cells(t), 0);
  ElementSystem w = trimmed_system(tri, 1);
  GlobalSpace bnd1 = global_space(w, tri.boundary_complex_cells(t), 0);
  CHECK(bnd1.dim() == 3);
}

TEST_CASE("extension checks")
{
  // trimmed systems admit extensions
  for (int p = 1; p <= 2; ++p) {
    Complex cx = fixtures::triangle();
    ElementSystem sys = trimmed_system(cx, p);
    for (int ci = 0; ci < cx.num_cells(); ++ci)
      for (int k = 0; k <= cx.cell(ci).dim; ++k)
        CHECK(check_extension(sys, ci, k));
  }

  // P1 on the triangle with P2 on the edges: fails on the triangle
  Complex cx = fixtures::triangle();
  ElementSystem bad = polynomial_system(cx, [&](int ci, int k) {
    int base = cx.cell(ci).dim == 2 ? 1 : 2;
    return std::max(base - k, k == 2 ? -1 : 0);
  });
  int t = tri_cell(cx);
  CHECK(!check_extension(bad, t, 0));
  // 0-cells are vacuous
  int v = cx.cell_of_simplex(cx.find_simplex({0}));
  CHECK(check_extension(bad, v, 0));
}

TEST_CASE("local exactness checks")
{
  Complex cx = fixtures::triangle();
  int t = tri_cell(cx);

  ElementSystem good = trimmed_system(cx, 1);
  CHECK(check_exactness_interior(good, t));
  CHECK(check_exactness_boundary(good, t));

  // constant order 1 for all degrees: P1 1-forms have too large a curl
  // kernel, so the sequence is inexact on the triangle
  ElementSystem flat = polynomial_system(cx, [](int, int) { return 1; });
  CHECK(!check_exactness_interior(flat, t));

  // point cells: exact iff A^0 is one-dimensional
  int v = cx.cell_of_simplex(cx.find_simplex({0}));
  CHECK(check_exactness_interior(good, v));
}

TEST_CASE("under extensions the two exactness notions agree")
{
  for (int p = 1; p <= 3; ++p) {
    Complex cx = fixtures::two_triangles();
    ElementSystem sys = trimmed_system(cx, p);
    for (int ci = 0; ci < cx.num_cells(); ++ci) {
      CHECK(check_exactness_interior(sys, ci) ==
            check_exactness_boundary(sys, ci));
    }
  }
}

TEST_CASE("compatibility reports")
{
  // trimmed p=2 on the two-triangle mesh: compatible, kernel count equality
  Complex cx = fixtures::two_triangles();
  ElementSystem sys = trimmed_system(cx, 2);
  CompatibilityReport report = compatibility(sys);
  CHECK(report.compatible);
  CHECK(report.kernel_count_equality);

  // variable order stays compatible
  MeshOrders orders;
  orders.default_order = 1;
  orders.per_cell[cx.cell(cx.cell_of_simplex(cx.find_simplex({0, 1, 2}))).id] = 2;
  ElementSystem vsys = trimmed_system(cx, orders);
  CHECK(compatibility(vsys).compatible);

  // the P1-cell / P2-edge counterexample is incompatible
  Complex tri = fixtures::triangle();
  ElementSystem bad = polynomial_system(tri, [&](int ci, int k) {
    int base = tri.cell(ci).dim == 2 ? 1 : 2;
    return std::max(base - k, k == 2 ? -1 : 0);
  });
  CompatibilityReport breport = compatibility(bad);
  CHECK(!breport.compatible);
  CHECK(!breport.admits_extensions);

  // report serialization is non-empty JSON
  CHECK(report.to_json().find("\"compatible\": true") != std::string::npos);
}

TEST_CASE("threaded compatibility matches single-threaded")
{
  Complex cx = fixtures::two_triangles();
  ElementSystem sys = trimmed_system(cx, 2);
  CompatibilityReport a = compatibility(sys, 1);
  CompatibilityReport b = compatibility(sys, 4);
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("de rham map")
{
  Complex cx = fixtures::two_triangles();
  ElementSystem sys = trimmed_system(cx, 1);
  GlobalSpace gs = global_space(sys, cx.all_cells(), 1);
  MatQ rho = de_rham_matrix(sys, gs);
  REQUIRE(rho.rows() == 5);
  REQUIRE(rho.cols() == 5);
  // the De Rham map on the Whitney global space is invertible
  CHECK(rank(rho) == 5);

  // rho(du) = delta(rho u), exactly, for all global 0-forms
  GlobalSpace gs0 = global_space(sys, cx.all_cells(), 0);
  MatQ rho0 = de_rham_matrix(sys, gs0);
  MatQ dmat = global_d_matrix(sys, gs0, gs);
  MatQ delta0 = cx.coboundary_matrix(0);
  CHECK(rho * dmat == delta0 * rho0);

  // zero form maps to the zero cochain
  Cochain z = de_rham_cochain(sys, gs, VecQ::Zero(5));
  for (const auto& [id, v] : z.values) CHECK(v == 0);
}

TEST_CASE("discrete cohomology matches cochain cohomology")
{
  // contractible mesh
  {
    Complex cx = fixtures::two_triangles();
    ElementSystem sys = trimmed_system(cx, 1);
    CohomologyReport r = discrete_cohomology_check(sys);
    CHECK(r.isomorphic);
    CHECK(r.system_betti == std::vector<int>{1, 0, 0});
  }
  // annulus, p = 1 and p = 2
  for (int p = 1; p <= 2; ++p) {
    Complex cx = fixtures::annulus();
    ElementSystem sys = trimmed_system(cx, p);
    CohomologyReport r = discrete_cohomology_check(sys);
    CHECK(r.isomorphic);
    CHECK(r.system_betti == std::vector<int>{1, 1, 0});
  }
  // tetra boundary surface mesh
  {
    Complex cx = fixtures::tetra_boundary();
    ElementSystem sys = trimmed_system(cx, 1);
    CohomologyReport r = discrete_cohomology_check(sys);
    CHECK(r.isomorphic);
    CHECK(r.system_betti == std::vector<int>{1, 0, 1});
  }
}

TEST_CASE("dims bounded below by subcell counts")
{
  Complex cx = fixtures::two_triangles();
  for (int p = 1; p <= 2; ++p) {
    ElementSystem sys = trimmed_system(cx, p);
    for (int ci = 0; ci < cx.num_cells(); ++ci)
      for (int k = 0; k <= cx.cell(ci).dim; ++k) {
        int count = 0;
        for (int w : cx.subcells(ci))
          if (cx.cell(w).dim == k) ++count;
        CHECK(sys.space_dim(ci, k) >= count);
      }
  }
}

TEST_CASE("agglomerated cells host piecewise systems")
{
  Complex cx = fixtures::square_cell();
  ElementSystem sys = trimmed_system(cx, 1);
  int q = cx.cell_index("Q");
  // piecewise-Whitney forms on the square: global space over the two
  // support triangles
  CHECK(sys.space_dim(q, 0) == 4);
  CHECK(sys.space_dim(q, 1) == 5);
  CHECK(sys.space_dim(q, 2) == 2);
  CompatibilityReport report = compatibility(sys);
  CHECK(report.compatible);

  // global dims coincide with the underlying fine system's
  Complex fine = fixtures::two_triangles();
  ElementSystem fsys = trimmed_system(fine, 1);
  for (int k = 0; k <= 2; ++k)
    CHECK(global_space(sys, cx.all_cells(), k).dim() ==
          global_space(fsys, fine.all_cells(), k).dim());
}

TEST_CASE("error paths: subcells, zero cells, non-simplicial refinement")
{
  Complex cx = fixtures::two_triangles();
  ElementSystem sys = trimmed_system(cx, 1);
  int t0 = cx.cell_of_simplex(cx.find_simplex({0, 1, 2}));
  int t1 = cx.cell_of_simplex(cx.find_simplex({0, 2, 3}));
  CHECK_THROWS_AS(sys.restriction(t0, t1, 0), NotASubcell);

  int v = cx.cell_of_simplex(cx.find_simplex({0}));
  CHECK_THROWS_AS(cx.boundary_subcomplex(cx.cell(v).id), ZeroCell);
  CHECK_THROWS_AS(cx.cell_index("nope"), UnknownCell);

  Complex agg = fixtures::square_cell();
  CHECK_THROWS_AS(agg.barycentric_refinement(), NotSimplicial);
  CHECK_THROWS_AS(polynomial_system(agg, [](int, int) { return 1; }),
                  NotSimplicial);
}

TEST_CASE("global space coordinates reject foreign families")
{
  Complex cx = fixtures::two_triangles();
  ElementSystem sys = trimmed_system(cx, 1);
  GlobalSpace gs = global_space(sys, cx.all_cells(), 1);
  // a per-cell family that breaks the matching constraints
  std::map<int, VecQ> broken;
  int t0 = cx.cell_of_simplex(cx.find_simplex({0, 1, 2}));
  VecQ c = VecQ::Zero(sys.space_dim(t0, 1));
  c(0) = 1;
  broken[t0] = c;  // nonzero on one triangle, zero on its edges
  CHECK_THROWS_AS(global_coords_of(sys, gs, broken), NotInSpace);
}
