#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fes/complex.hpp"
#include "fes/meshio.hpp"
#include "oracles.hpp"

using namespace fes;

namespace {

VecQ pt(std::initializer_list<Rational> v)
{
  VecQ out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const auto& x : v) out(i++) = x;
  return out;
}

Complex one_triangle()
{
  return Complex::simplicial(2, {pt({0, 0}), pt({1, 0}), pt({0, 1})},
                             {{0, 1, 2}});
}

Complex two_triangles()
{
  return Complex::simplicial(
      2, {pt({0, 0}), pt({1, 0}), pt({1, 1}), pt({0, 1})},
      {{0, 1, 2}, {0, 2, 3}});
}

Complex tetrahedron()
{
  return Complex::simplicial(
      3, {pt({0, 0, 0}), pt({1, 0, 0}), pt({0, 1, 0}), pt({0, 0, 1})},
      {{0, 1, 2, 3}});
}

Complex square_cell()
{
  // Two triangles agglomerated into one square 2-cell.  Simplex ids come
  // from the deterministic closure of the same substrate.
  Complex base = two_triangles();
  int t0 = base.find_simplex({0, 1, 2});
  int t1 = base.find_simplex({0, 2, 3});
  return Complex::with_cells(2,
                             {pt({0, 0}), pt({1, 0}), pt({1, 1}), pt({0, 1})},
                             {{0, 1, 2}, {0, 2, 3}}, {{"Q", {t0, t1}}});
}

}  // namespace

TEST_CASE("face closure counts")
{
  Complex tri = one_triangle();
  CHECK(tri.simplices_of_dim(0).size() == 3);
  CHECK(tri.simplices_of_dim(1).size() == 3);
  CHECK(tri.simplices_of_dim(2).size() == 1);
  CHECK(tri.num_cells() == 7);

  Complex two = two_triangles();
  CHECK(two.simplices_of_dim(0).size() == 4);
  CHECK(two.simplices_of_dim(1).size() == 5);  // shared edge stored once
  CHECK(two.simplices_of_dim(2).size() == 2);

  Complex tet = tetrahedron();
  CHECK(tet.simplices_of_dim(0).size() == 4);
  CHECK(tet.simplices_of_dim(1).size() == 6);
  CHECK(tet.simplices_of_dim(2).size() == 4);
  CHECK(tet.simplices_of_dim(3).size() == 1);
}

TEST_CASE("degenerate and malformed inputs are rejected")
{
  CHECK_THROWS_AS(Complex::simplicial(2, {pt({0, 0}), pt({1, 0}), pt({2, 0})},
                                      {{0, 1, 2}}),
                  DegenerateSimplex);
  CHECK_THROWS_AS(Complex::simplicial(2, {pt({0, 0}), pt({1, 0})}, {{0, 5}}),
                  NonComplex);
}

TEST_CASE("incidence numbers")
{
  Complex tri = one_triangle();
  // edge (v0, v1): o(e, v1) = +1, o(e, v0) = -1
  int e01 = tri.find_simplex({0, 1});
  int ce = tri.cell_of_simplex(e01);
  int cv0 = tri.cell_of_simplex(tri.find_simplex({0}));
  int cv1 = tri.cell_of_simplex(tri.find_simplex({1}));
  CHECK(tri.incidence(ce, cv1) == 1);
  CHECK(tri.incidence(ce, cv0) == -1);
  CHECK(tri.incidence(ce, ce) == 0);

  // triangle against edges (1,2), (0,2), (0,1): signs +1, -1, +1
  int ct = tri.cell_of_simplex(tri.find_simplex({0, 1, 2}));
  CHECK(tri.incidence(ct, tri.cell_of_simplex(tri.find_simplex({1, 2}))) == 1);
  CHECK(tri.incidence(ct, tri.cell_of_simplex(tri.find_simplex({0, 2}))) == -1);
  CHECK(tri.incidence(ct, tri.cell_of_simplex(tri.find_simplex({0, 1}))) == 1);

  CHECK_THROWS_AS(tri.incidence(99, 0), UnknownCell);
}

TEST_CASE("coboundary matrices and delta.delta = 0")
{
  // single edge: delta0 is the column (-1, +1)^T read as rows per edge
  Complex edge = Complex::simplicial(1, {pt({0}), pt({1})}, {{0, 1}});
  MatQ d0 = edge.coboundary_matrix(0);
  REQUIRE(d0.rows() == 1);
  REQUIRE(d0.cols() == 2);
  CHECK(d0(0, 0) == -1);
  CHECK(d0(0, 1) == 1);

  for (const Complex& cx : {one_triangle(), two_triangles(), tetrahedron()}) {
    for (int k = 0; k + 1 < cx.dim(); ++k) {
      MatQ a = cx.coboundary_matrix(k);
      MatQ b = cx.coboundary_matrix(k + 1);
      MatQ z = b * a;
      for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j) CHECK(z(i, j) == 0);
    }
  }
}

TEST_CASE("betti numbers of basic fixtures")
{
  CHECK(one_triangle().betti_numbers() == std::vector<int>{1, 0, 0});

  // boundary of a triangle: a circle
  Complex tri = one_triangle();
  Complex circle = tri.boundary_subcomplex(
      tri.cell(tri.cell_of_simplex(tri.find_simplex({0, 1, 2}))).id);
  CHECK(circle.betti_numbers() == std::vector<int>{1, 1});

  // boundary of a tetrahedron: a 2-sphere, and rank checks
  Complex tet = tetrahedron();
  Complex sphere = tet.boundary_subcomplex(
      tet.cell(tet.cell_of_simplex(tet.find_simplex({0, 1, 2, 3}))).id);
  CHECK(sphere.betti_numbers() == std::vector<int>{1, 0, 1});
  CHECK(rank(sphere.coboundary_matrix(0)) == 3);
  CHECK(rank(sphere.coboundary_matrix(1)) == 3);
}

TEST_CASE("skeletons")
{
  Complex tri = one_triangle();
  Complex sk0 = tri.skeleton(0);
  CHECK(sk0.num_cells() == 3);
  CHECK(sk0.dim() == 0);

  Complex tet = tetrahedron();
  Complex sk1 = tet.skeleton(1);  // K4 graph: b1 = E - V + 1 = 3
  CHECK(sk1.betti_numbers() == std::vector<int>{1, 3});

  Complex full = tet.skeleton(tet.dim());
  CHECK(full.num_cells() == tet.num_cells());
}

TEST_CASE("agglomerated square cell")
{
  Complex cx = square_cell();
  cx.validate(true);

  int q = cx.cell_index("Q");
  CHECK(cx.cell(q).dim == 2);
  CHECK(cx.cell(q).support.size() == 2);
  CHECK(cx.cell(q).boundary.size() == 4);  // four boundary edges
  CHECK(cx.cells_of_dim(0).size() == 4);
  CHECK(cx.cells_of_dim(1).size() == 4);  // interior diagonal is not a cell
  CHECK(cx.cells_of_dim(2).size() == 1);
  CHECK(cx.betti_numbers() == std::vector<int>{1, 0, 0});

  // boundary subcomplex of Q: 4 vertices + 4 edges, a circle
  Complex bq = cx.boundary_subcomplex("Q");
  CHECK(bq.cells_of_dim(0).size() == 4);
  CHECK(bq.cells_of_dim(1).size() == 4);
  CHECK(bq.betti_numbers() == std::vector<int>{1, 1});

  // Stokes over the agglomerated cell, exact
  testing::RatRng rng(61);
  for (int trial = 0; trial < 4; ++trial) {
    PolyForm u = rng.form(2, 1, 3);
    Rational lhs = cx.integrate_ambient(d(u), q);
    Rational rhs(0);
    for (int bc : cx.cell(q).boundary)
      rhs += Rational(cx.incidence(q, bc)) * cx.integrate_ambient(u, bc);
    CHECK(lhs == rhs);
  }
}

TEST_CASE("stokes over every cell of the two-triangle mesh")
{
  Complex cx = two_triangles();
  testing::RatRng rng(67);
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    if (cx.cell(ci).dim == 0) continue;
    PolyForm u = rng.form(2, cx.cell(ci).dim - 1, 3);
    Rational lhs = cx.integrate_ambient(d(u), ci);
    Rational rhs(0);
    for (int bc : cx.cell(ci).boundary)
      rhs += Rational(cx.incidence(ci, bc)) * cx.integrate_ambient(u, bc);
    CHECK(lhs == rhs);
  }
}

TEST_CASE("barycentric refinement")
{
  Complex tri = one_triangle();
  auto ref = tri.barycentric_refinement();
  CHECK(ref.complex.simplices_of_dim(2).size() == 6);
  CHECK(ref.complex.betti_numbers() == tri.betti_numbers());

  Complex edge = Complex::simplicial(1, {pt({0}), pt({1})}, {{0, 1}});
  auto eref = edge.barycentric_refinement();
  CHECK(eref.complex.simplices_of_dim(1).size() == 2);

  Complex two = two_triangles();
  auto tref = two.barycentric_refinement();
  CHECK(tref.complex.betti_numbers() == two.betti_numbers());

  // parent map dimensions never exceed the child's parent dimension
  for (int s = 0; s < tref.complex.num_simplices(); ++s) {
    int p = tref.parent[s];
    CHECK(p >= 0);
    CHECK(two.simplex(p).dim() >= tref.complex.simplex(s).dim());
  }
}

TEST_CASE("refinement cochain map")
{
  // identity refinement: parent = identity over simplices
  Complex two = two_triangles();
  std::vector<int> ident(static_cast<size_t>(two.num_simplices()));
  for (int s = 0; s < two.num_simplices(); ++s) ident[static_cast<size_t>(s)] = s;
  for (int k = 0; k <= 2; ++k) {
    MatQ iota = refinement_cochain_map(two, two, ident, k);
    CHECK(iota == MatQ::Identity(iota.rows(), iota.cols()));
  }

  // edge split in two: row (1, 1) with matching orientations
  Complex coarse = Complex::simplicial(1, {pt({0}), pt({1})}, {{0, 1}});
  Complex fine =
      Complex::simplicial(1, {pt({0}), pt({Rational(1, 2)}), pt({1})},
                          {{0, 1}, {1, 2}});
  std::vector<int> parent(static_cast<size_t>(fine.num_simplices()));
  int ce = coarse.find_simplex({0, 1});
  for (int s = 0; s < fine.num_simplices(); ++s) {
    const auto& verts = fine.simplex(s).verts;
    if (fine.simplex(s).dim() == 1 || verts[0] == 1)
      parent[static_cast<size_t>(s)] = ce;  // midpoint sits inside the edge
    else
      parent[static_cast<size_t>(s)] =
          coarse.find_simplex({verts[0] == 2 ? 1 : 0});
  }
  MatQ iota1 = refinement_cochain_map(fine, coarse, parent, 1);
  REQUIRE(iota1.rows() == 1);
  REQUIRE(iota1.cols() == 2);
  CHECK(iota1(0, 0) == 1);
  CHECK(iota1(0, 1) == 1);

  // commutation iota delta_fine = delta_coarse iota on a refined triangle
  Complex tri = one_triangle();
  auto ref = tri.barycentric_refinement();
  for (int k = 0; k + 1 <= tri.dim(); ++k) {
    MatQ ik = refinement_cochain_map(ref.complex, tri, ref.parent, k);
    MatQ ik1 = refinement_cochain_map(ref.complex, tri, ref.parent, k + 1);
    MatQ lhs = ik1 * ref.complex.coboundary_matrix(k);
    MatQ rhs = tri.coboundary_matrix(k) * ik;
    CHECK(lhs == rhs);
  }
}

TEST_CASE("dual complex of the two-triangle square")
{
  Complex two = two_triangles();
  auto dual = two.dual_complex();
  const Complex& dc = dual.complex;
  dc.validate(true);

  // one dual 2-cell per primal vertex
  CHECK(dc.cells_of_dim(2).size() == 4);
  // dual 1-cells: 5 edge duals + 4 boundary-vertex duals
  CHECK(dc.cells_of_dim(1).size() == 9);
  // dual 0-cells: 2 triangle barycenters + 4 boundary edge midpoints
  CHECK(dc.cells_of_dim(0).size() == 6);
  CHECK(dc.betti_numbers() == std::vector<int>{1, 0, 0});

  // the dual 2-cell of a vertex is its barycentric star
  for (int ci : dc.cells_of_dim(2)) {
    const std::string& id = dc.cell(ci).id;
    const std::string primal_id = dual.primal_of.at(id);
    int pv = two.cell_index(primal_id);
    CHECK(two.cell(pv).dim == 0);
    // star size: number of incident triangles times 2
    int v = two.cell(pv).support[0].first;
    int count = 0;
    for (int t : two.simplices_of_dim(2))
      if (two.simplex_contains(t, v)) count += 2;
    CHECK(static_cast<int>(dc.cell(ci).support.size()) == count);
  }

  // delta-delta = 0 on the dual complex
  for (int k = 0; k + 1 < dc.dim(); ++k) {
    MatQ z = dc.coboundary_matrix(k + 1) * dc.coboundary_matrix(k);
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      for (Eigen::Index j = 0; j < z.cols(); ++j) CHECK(z(i, j) == 0);
  }
}

TEST_CASE("dual of a single triangle")
{
  Complex tri = one_triangle();
  auto dual = tri.dual_complex();
  CHECK(dual.complex.cells_of_dim(2).size() == 3);
  CHECK(dual.complex.cells_of_dim(1).size() == 6);
  CHECK(dual.complex.cells_of_dim(0).size() == 4);
  CHECK(dual.complex.betti_numbers() == std::vector<int>{1, 0, 0});
}

TEST_CASE("dual rejects non-manifold input")
{
  // three triangles sharing one edge
  Complex bad = Complex::simplicial(
      3,
      {pt({0, 0, 0}), pt({1, 0, 0}), pt({0, 1, 0}), pt({0, 0, 1}),
       pt({0, -1, 0})},
      {{0, 1, 2}, {0, 1, 3}, {0, 1, 4}});
  CHECK_THROWS_AS(bad.dual_complex(), NotManifoldLike);
}

TEST_CASE("mesh json round trip")
{
  Complex two = two_triangles();
  std::string text = mesh_to_json(two);
  MeshFile mf = parse_mesh(text);
  CHECK(mf.complex.num_cells() == two.num_cells());
  CHECK(mf.complex.betti_numbers() == two.betti_numbers());
  CHECK(mesh_to_json(mf.complex) == text);

  // agglomeration metadata round trip through the dual complex
  auto dual = two.dual_complex();
  std::string dtext = mesh_to_json(dual.complex);
  MeshFile dmf = parse_mesh(dtext);
  CHECK(dmf.complex.num_cells() == dual.complex.num_cells());
  for (int ci = 0; ci < dual.complex.num_cells(); ++ci)
    CHECK(dmf.complex.cell_index(dual.complex.cell(ci).id) >= 0);
  CHECK(mesh_to_json(dmf.complex) == dtext);

  CHECK_THROWS_AS(parse_mesh("{ not json"), MeshParseError);
  CHECK_THROWS_AS(parse_mesh("{\"dimension\": 2, \"vertices\": [], "
                             "\"simplices\": [], \"bogus\": 1}"),
                  MeshParseError);
}

TEST_CASE("prop 2.1 validation accepts good complexes")
{
  two_triangles().validate(true);
  tetrahedron().validate(true);
}
