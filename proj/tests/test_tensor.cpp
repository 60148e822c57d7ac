#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fes/tensor.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fes;

TEST_CASE("product complex counts and units")
{
  // interval x interval: the unit square, 4 + 4 + 1 cells
  Complex u = fixtures::interval();
  Complex v = fixtures::interval();
  ProductComplex pc = product_complex(u, v);
  CHECK(pc.complex.cells_of_dim(0).size() == 4);
  CHECK(pc.complex.cells_of_dim(1).size() == 4);
  CHECK(pc.complex.cells_of_dim(2).size() == 1);
  CHECK(pc.complex.betti_numbers() == std::vector<int>{1, 0, 0});
  pc.complex.validate(true);

  // point x V is isomorphic to V
  Complex pt = Complex::simplicial(1, {fixtures::pt({0})}, {{0}});
  Complex w = fixtures::interval2();
  ProductComplex unit = product_complex(pt, w);
  CHECK(unit.complex.num_cells() == w.num_cells());
  for (int k = 0; k <= 1; ++k)
    CHECK(unit.complex.cells_of_dim(k).size() == w.cells_of_dim(k).size());

  // delta delta = 0 on products
  for (int k = 0; k + 1 < pc.complex.dim(); ++k) {
    MatQ z = pc.complex.coboundary_matrix(k + 1) * pc.complex.coboundary_matrix(k);
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      for (Eigen::Index j = 0; j < z.cols(); ++j) CHECK(z(i, j) == 0);
  }
}

TEST_CASE("graded Leibniz incidence on the product")
{
  Complex u = fixtures::interval();
  Complex v = fixtures::interval2();
  ProductComplex pc = product_complex(u, v);
  const Complex& prod = pc.complex;
  for (const auto& [factors, ci] : pc.cell_of) {
    auto [cu, cv] = factors;
    // o(U x V, U' x V) = o(U, U')
    for (int a2 = 0; a2 < u.num_cells(); ++a2) {
      if (u.cell(a2).dim != u.cell(cu).dim - 1) continue;
      if (!u.is_subcell(a2, cu)) continue;
      int sub = pc.cell_of.at({a2, cv});
      CHECK(prod.incidence(ci, sub) == u.incidence(cu, a2));
    }
    // o(U x V, U x V') = (-1)^{dim U} o(V, V')
    for (int b2 = 0; b2 < v.num_cells(); ++b2) {
      if (v.cell(b2).dim != v.cell(cv).dim - 1) continue;
      if (!v.is_subcell(b2, cv)) continue;
      int sub = pc.cell_of.at({cu, b2});
      int sign = (u.cell(cu).dim % 2 == 0) ? 1 : -1;
      CHECK(prod.incidence(ci, sub) == sign * v.incidence(cv, b2));
    }
  }
}

TEST_CASE("cylinder: interval x square boundary")
{
  Complex u = fixtures::interval();
  Complex v = fixtures::square_boundary();
  ProductComplex pc = product_complex(u, v);
  CHECK(pc.complex.betti_numbers() == std::vector<int>{1, 1, 0});
}

TEST_CASE("tensor system dimensions (whitney x whitney on a square)")
{
  Complex u = fixtures::interval();
  Complex v = fixtures::interval();
  ProductComplex pc = product_complex(u, v);
  ElementSystem a = trimmed_system(u, 1);
  ElementSystem b = trimmed_system(v, 1);
  ElementSystem c = tensor_system(pc, u, v, a, b);
  int eu = u.cell_of_simplex(u.find_simplex({0, 1}));
  int ev = v.cell_of_simplex(v.find_simplex({0, 1}));
  int square = pc.cell_of.at({eu, ev});
  CHECK(c.space_dim(square, 0) == 4);  // bilinear Q1
  CHECK(c.space_dim(square, 1) == 4);  // 2*1 + 1*2
  CHECK(c.space_dim(square, 2) == 1);

  // d obeys the Leibniz rule through the construction: dd = 0 and
  // closure were verified at build; check the kernel identity too
  CHECK(c.kernel_coords(square, 2).cols() ==
        a.kernel_coords(eu, 1).cols() * b.kernel_coords(ev, 1).cols());
}

TEST_CASE("tensor identities on interval x interval")
{
  Complex u = fixtures::interval();
  Complex v = fixtures::interval();
  ProductComplex pc = product_complex(u, v);
  for (int p = 1; p <= 2; ++p) {
    ElementSystem a = trimmed_system(u, p);
    ElementSystem b = trimmed_system(v, p);
    ElementSystem c = tensor_system(pc, u, v, a, b);
    TensorCheckReport report = tensor_dimension_checks(pc, u, v, a, b, c);
    CHECK(report.kernel_identity);
    CHECK(report.global_dims);
    CHECK(report.extensions);
    CHECK(report.mayer_vietoris);
    CHECK(report.local_exactness);

    CompatibilityReport compat = compatibility(c);
    CHECK(compat.compatible);
  }
}

TEST_CASE("tensor identities on interval x two-interval mesh, mixed orders")
{
  Complex u = fixtures::interval();
  Complex v = fixtures::interval2();
  ProductComplex pc = product_complex(u, v);
  ElementSystem a = trimmed_system(u, 1);
  ElementSystem b = trimmed_system(v, 2);
  ElementSystem c = tensor_system(pc, u, v, a, b);
  TensorCheckReport report = tensor_dimension_checks(pc, u, v, a, b, c);
  CHECK(report.kernel_identity);
  CHECK(report.global_dims);
  CHECK(report.extensions);
  CHECK(report.mayer_vietoris);
  CHECK(report.local_exactness);
  CHECK(compatibility(c).compatible);
}

TEST_CASE("leibniz rule for tensor forms")
{
  Complex u = fixtures::interval();
  Complex v = fixtures::interval();
  ProductComplex pc = product_complex(u, v);
  ElementSystem a = trimmed_system(u, 2);
  ElementSystem b = trimmed_system(v, 2);
  int eu = u.cell_of_simplex(u.find_simplex({0, 1}));
  int ev = v.cell_of_simplex(v.find_simplex({0, 1}));
  int square = pc.cell_of.at({eu, ev});
  const Complex& prod = pc.complex;
  int s = prod.cell(square).support[0].first;

  // d(u tensor v) = du tensor v + (-1)^{deg u} u tensor dv on the chart
  auto tensor_part = [&](const PolyForm& fu, const PolyForm& fv) {
    AffineEmbed cu = prod.chart(s);
    // U coordinates are the first coordinate, V the second
    AffineEmbed pu{MatQ(1, 2), VecQ(1)};
    AffineEmbed pv{MatQ(1, 2), VecQ(1)};
    // build from the chart directly: x_U = offset + linear row 0
    pu.linear = cu.linear.topRows(1);
    pu.offset = cu.offset.head(1);
    pv.linear = cu.linear.bottomRows(1);
    pv.offset = cu.offset.tail(1);
    // express in the factor charts (identity here: interval chart is x)
    return wedge(pullback(pu, fu), pullback(pv, fv));
  };
  testing::RatRng rng(404);
  for (int trial = 0; trial < 5; ++trial) {
    PolyForm fu = rng.form(1, 0, 2);
    PolyForm fv = rng.form(1, 1, 1);
    PolyForm lhs = d(tensor_part(fu, fv));
    PolyForm rhs = tensor_part(d(fu), fv);  // deg fu = 0: no sign
    CHECK(lhs == rhs);

    PolyForm gu = rng.form(1, 1, 1);
    PolyForm gv = rng.form(1, 0, 2);
    PolyForm lhs2 = d(tensor_part(gu, gv));
    PolyForm rhs2 = Rational(-1) * tensor_part(gu, d(gv));  // (-1)^{deg gu}
    CHECK(lhs2 == rhs2);
  }
}

TEST_CASE("tensor mirrors")
{
  Complex u = fixtures::interval();
  Complex v = fixtures::interval();
  ProductComplex pc = product_complex(u, v);
  ElementSystem a = trimmed_system(u, 1);
  ElementSystem b = trimmed_system(v, 1);
  ElementSystem c = tensor_system(pc, u, v, a, b);
  MirrorSystem z = canonical_trimmed_mirrors(u, 1);
  MirrorSystem y = canonical_trimmed_mirrors(v, 1);
  MirrorSystem zy = tensor_mirrors(pc, u, v, a, b, z, y);

  // whitney interval DOFs tensor whitney interval DOFs: 4 vertex
  // evaluations, 4 edge integrals, 1 face integral
  int eu = u.cell_of_simplex(u.find_simplex({0, 1}));
  int ev = v.cell_of_simplex(v.find_simplex({0, 1}));
  int square = pc.cell_of.at({eu, ev});
  CHECK(zy.mirrors(square, 2).size() == 1);
  Eigen::Index vertex_dofs = 0, edge_dofs = 0;
  for (const auto& [key, ci] : pc.cell_of) {
    const Complex& prod = pc.complex;
    if (prod.cell(ci).dim == 0) vertex_dofs += zy.mirrors(ci, 0).size();
    if (prod.cell(ci).dim == 1) edge_dofs += zy.mirrors(ci, 1).size();
  }
  CHECK(vertex_dofs == 4);
  CHECK(edge_dofs == 4);

  CHECK(faithfulness_check(zy, c));

  // one unfaithful factor is rejected
  MirrorSystem empty;
  CHECK_THROWS_AS(tensor_mirrors(pc, u, v, a, b, empty, y),
                  NotFaithfulInputs);
}
