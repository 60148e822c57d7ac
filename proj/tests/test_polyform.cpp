#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fes/polyform.hpp"
#include "oracles.hpp"

using namespace fes;

namespace {

PolyForm x_dy()
{
  // x dy on R^2
  Monomial m{1, 0};
  return monomial_form(2, AltMask(2), m, Rational(1));
}

}  // namespace

TEST_CASE("exterior derivative basics")
{
  // d(x dy) = dx ^ dy
  PolyForm u = x_dy();
  PolyForm du = d(u);
  CHECK(du.coeff(3, Monomial{0, 0}) == 1);
  CHECK(du.terms().size() == 1);

  // constants are closed
  PolyForm c = constant_form(3, mask_from_indices({0, 2}), Rational(7));
  CHECK(d(c).is_zero());
}

TEST_CASE("exterior derivative agrees with the term-by-term oracle")
{
  testing::RatRng rng(99);
  for (int dim = 1; dim <= 3; ++dim)
    for (int k = 0; k < dim; ++k)
      for (int trial = 0; trial < 5; ++trial) {
        PolyForm u = rng.form(dim, k, 3);
        CHECK(d(u) == testing::oracle_d(u));
      }
}

TEST_CASE("dd = 0 for random forms, d <= 3, p <= 4")
{
  testing::RatRng rng(7);
  for (int dim = 1; dim <= 3; ++dim)
    for (int k = 0; k <= dim; ++k)
      for (int p = 0; p <= 4; ++p) {
        PolyForm u = rng.form(dim, k, p);
        CHECK(d(d(u)).is_zero());
      }
}

TEST_CASE("wedge: anticommutativity and unit")
{
  PolyForm dx = constant_form(2, 1, Rational(1));
  PolyForm dy = constant_form(2, 2, Rational(1));
  CHECK(wedge(dx, dy) == Rational(-1) * wedge(dy, dx));

  // f ^ u = f.u for a 0-form f
  testing::RatRng rng(3);
  PolyForm f = rng.form(2, 0, 2);
  PolyForm u = rng.form(2, 1, 2);
  PolyForm prod = wedge(f, u);
  PolyForm graded = wedge(u, f);
  CHECK(prod == graded);  // (-1)^{0*1} = 1

  // graded rule for two 1-forms
  PolyForm a = rng.form(3, 1, 2), b = rng.form(3, 1, 2);
  CHECK(wedge(a, b) == Rational(-1) * wedge(b, a));

  // degree overflow collapses to the zero top form
  PolyForm w2 = rng.form(2, 2, 1);
  CHECK(wedge(w2, rng.form(2, 1, 1)).is_zero());
}

TEST_CASE("koszul: examples and identities")
{
  // koszul(dx^dy) = x dy - y dx
  PolyForm area = constant_form(2, 3, Rational(1));
  PolyForm k = koszul(area);
  CHECK(k.coeff(2, Monomial{1, 0}) == 1);
  CHECK(k.coeff(1, Monomial{0, 1}) == -1);

  testing::RatRng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    PolyForm u = rng.form(3, 2, 3);
    CHECK(koszul(koszul(u)).is_zero());
  }
}

TEST_CASE("homotopy identity (d koszul + koszul d) = (r + k) id on homogeneous forms")
{
  // over the monomial basis: u = x^alpha dx_I with |alpha| = r
  for (int dim = 1; dim <= 3; ++dim)
    for (int k = 1; k <= dim; ++k)
      for (int r = 0; r <= 3; ++r) {
        for (const auto& b : full_poly_basis(r, k, dim)) {
          if (b.poly_degree() != r) continue;  // keep exactly homogeneous
          PolyForm lhs = d(koszul(b));
          if (k < dim) lhs += koszul(d(b));
          PolyForm rhs = Rational(r + k) * b;
          CHECK(lhs == rhs);
        }
      }
  // spec example: u = x dy gives (d koszul + koszul d) u = 2 u
  PolyForm u = x_dy();
  PolyForm lhs = d(koszul(u)) + koszul(d(u));
  CHECK(lhs == Rational(2) * u);
}

TEST_CASE("pullback: identity, collapse, chain rule")
{
  testing::RatRng rng(23);
  PolyForm u = rng.form(2, 1, 3);
  CHECK(pullback(AffineEmbed::identity(2), u) == u);

  // pullback of dy to the x-axis embedding t -> (t, 0) vanishes
  AffineEmbed axis{MatQ(2, 1), VecQ::Zero(2)};
  axis.linear << 1, 0;
  PolyForm dy = constant_form(2, 2, Rational(1));
  CHECK(pullback(axis, dy).is_zero());

  // pullback of x dy along t -> (t, 2t) is 2t dt
  AffineEmbed diag{MatQ(2, 1), VecQ::Zero(2)};
  diag.linear << 1, 2;
  PolyForm pb = pullback(diag, x_dy());
  CHECK(pb.coeff(1, Monomial{1}) == 2);
  CHECK(pb.terms().size() == 1);
}

TEST_CASE("pullback commutes with d for random affine maps")
{
  testing::RatRng rng(31);
  for (int trial = 0; trial < 8; ++trial) {
    int dt = 2 + rng.uniform_int(2);  // target 2..3
    int ds = 1 + rng.uniform_int(dt - 1);
    AffineEmbed phi{MatQ(dt, ds), VecQ(dt)};
    for (int i = 0; i < dt; ++i) {
      phi.offset(i) = rng.rational();
      for (int j = 0; j < ds; ++j) phi.linear(i, j) = rng.rational();
    }
    if (rank(phi.linear) != ds) continue;
    for (int k = 0; k < dt; ++k) {
      PolyForm u = rng.form(dt, k, 3);
      CHECK(pullback(phi, d(u)) == d(pullback(phi, u)));
    }
  }
}

TEST_CASE("full polynomial space dimensions")
{
  CHECK(full_poly_basis(0, 0, 2).size() == 1);
  CHECK(full_poly_basis(1, 1, 2).size() == 6);
  CHECK(full_poly_basis(2, 1, 3).size() == 30);
  for (int d = 1; d <= 3; ++d)
    for (int k = 0; k <= d; ++k)
      for (int p = 0; p <= 3; ++p)
        CHECK(Rational(static_cast<long>(full_poly_basis(p, k, d).size())) ==
              full_poly_dimension(p, k, d));
}

TEST_CASE("trimmed space dimensions match the closed form, d <= 3, p <= 4")
{
  CHECK(trimmed_basis(1, 1, 2).size() == 3);
  CHECK(trimmed_basis(2, 1, 2).size() == 8);
  for (int d = 1; d <= 3; ++d) CHECK(trimmed_basis(1, 0, d).size() == d + 1);
  for (int d = 1; d <= 3; ++d)
    for (int k = 0; k <= d; ++k)
      for (int p = 1; p <= 4; ++p) {
        auto basis = trimmed_basis(p, k, d);
        CHECK(Rational(static_cast<long>(basis.size())) ==
              trimmed_dimension(p, k, d));
        // independence is part of the contract
        auto keys = collect_keys(basis);
        CHECK(rank(coeff_matrix(basis, keys)) ==
              static_cast<Eigen::Index>(basis.size()));
      }
}

TEST_CASE("trimmed spaces are closed under wedge (Lambda_p0 ^ Lambda_p1 in Lambda_p0+p1)")
{
  testing::RatRng rng(41);
  for (int d = 2; d <= 3; ++d)
    for (int k0 = 0; k0 <= 1; ++k0)
      for (int k1 = 0; k1 <= 1; ++k1) {
        if (k0 + k1 > d) continue;
        for (int trial = 0; trial < 3; ++trial) {
          int p0 = 1 + rng.uniform_int(2), p1 = 1 + rng.uniform_int(2);
          auto b0 = trimmed_basis(p0, k0, d);
          auto b1 = trimmed_basis(p1, k1, d);
          PolyForm u = zero_form(d, k0), v = zero_form(d, k1);
          for (const auto& b : b0) u += rng.rational() * b;
          for (const auto& b : b1) v += rng.rational() * b;
          PolyForm w = wedge(u, v);
          auto target = trimmed_basis(p0 + p1, k0 + k1, d);
          auto keys = collect_keys([&] {
            auto all = target;
            all.push_back(w);
            return all;
          }());
          MatQ basis_m = coeff_matrix(target, keys);
          MatQ wm = coeff_matrix({w}, keys);
          CHECK(in_span(basis_m, VecQ(wm.col(0))));
        }
      }
}

TEST_CASE("whitney forms: duality with subsimplices")
{
  // vertex form on an edge is the barycentric coordinate
  CHECK(whitney_form(1, {0}) == barycentric(1, 0));
  CHECK(whitney_form(1, {1}) == barycentric(1, 1));

  // edge forms on the triangle: integral over own edge 1, others 0
  std::vector<std::vector<int>> edges{{0, 1}, {0, 2}, {1, 2}};
  // chart vertices of the reference triangle
  MatQ tri(2, 3);
  tri << 0, 1, 0, 0, 0, 1;
  for (size_t a = 0; a < edges.size(); ++a) {
    PolyForm w = whitney_form(2, edges[a]);
    for (size_t b = 0; b < edges.size(); ++b) {
      MatQ ev(2, 2);
      ev.col(0) = tri.col(edges[b][0]);
      ev.col(1) = tri.col(edges[b][1]);
      Rational integral = integrate_simplex(w, ev);
      CHECK(integral == (a == b ? 1 : 0));
    }
  }

  // face form integrates to one over the triangle itself
  PolyForm face = whitney_form(2, {0, 1, 2});
  CHECK(integrate_std(face) == 1);
}

TEST_CASE("integration: barycentric monomial formula")
{
  // int over reference triangle of lambda_0 dA = area / 3 = 1/6
  PolyForm lam0 = barycentric(2, 0);
  PolyForm vol = constant_form(2, 3, Rational(1));
  CHECK(integrate_std(wedge(lam0, vol)) == Rational(1, 6));

  // int of d(lambda) over a closed chain is zero: boundary of the
  // reference triangle as three oriented edges
  MatQ tri(2, 3);
  tri << 0, 1, 0, 0, 0, 1;
  for (int i = 0; i < 3; ++i) {
    PolyForm u = d(barycentric(2, i));
    Rational total(0);
    int sign[3] = {1, -1, 1};  // faces (1,2), (0,2), (0,1)
    std::vector<std::vector<int>> faces{{1, 2}, {0, 2}, {0, 1}};
    for (int f = 0; f < 3; ++f) {
      MatQ ev(2, 2);
      ev.col(0) = tri.col(faces[f][0]);
      ev.col(1) = tri.col(faces[f][1]);
      total += Rational(sign[f]) * integrate_simplex(u, ev);
    }
    CHECK(total == 0);
  }
}

TEST_CASE("stokes on a single simplex for random polynomial forms")
{
  testing::RatRng rng(53);
  // triangle in R^2 with non-trivial rational vertices
  MatQ tri(2, 3);
  tri << 0, 2, Rational(1, 2), 0, Rational(1, 3), 1;
  std::vector<std::vector<int>> faces{{1, 2}, {0, 2}, {0, 1}};
  int sign[3] = {1, -1, 1};
  for (int trial = 0; trial < 6; ++trial) {
    PolyForm u = rng.form(2, 1, 3);
    Rational lhs = integrate_simplex(d(u), tri);
    Rational rhs(0);
    for (int f = 0; f < 3; ++f) {
      MatQ ev(2, 2);
      ev.col(0) = tri.col(faces[f][0]);
      ev.col(1) = tri.col(faces[f][1]);
      rhs += Rational(sign[f]) * integrate_simplex(u, ev);
    }
    CHECK(lhs == rhs);
  }
}

TEST_CASE("pointwise inner products via metric minors")
{
  MatQ id2 = MatQ::Identity(2, 2);
  PolyForm dx = constant_form(2, 1, Rational(1));
  PolyForm dy = constant_form(2, 2, Rational(1));
  CHECK(pointwise_inner(dx, dx, id2).coeff(0, Monomial{0, 0}) == 1);
  CHECK(pointwise_inner(dx, dy, id2).is_zero());
  // scaled metric g = diag(4, 1) has ginv = diag(1/4, 1): |dx|^2 = 1/4
  MatQ ginv = MatQ::Identity(2, 2);
  ginv(0, 0) = Rational(1, 4);
  CHECK(pointwise_inner(dx, dx, ginv).coeff(0, Monomial{0, 0}) ==
        Rational(1, 4));
}
