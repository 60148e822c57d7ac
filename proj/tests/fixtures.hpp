// Shared mesh builders for tests and the acceptance suite.

#ifndef FES_TESTS_FIXTURES_HPP
#define FES_TESTS_FIXTURES_HPP

#include <vector>

#include "fes/complex.hpp"

namespace fixtures {

inline fes::VecQ pt(std::initializer_list<fes::Rational> v)
{
  fes::VecQ out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const auto& x : v) out(i++) = x;
  return out;
}

inline fes::Complex triangle()
{
  return fes::Complex::simplicial(2, {pt({0, 0}), pt({1, 0}), pt({0, 1})},
                                  {{0, 1, 2}});
}

inline fes::Complex two_triangles()
{
  return fes::Complex::simplicial(
      2, {pt({0, 0}), pt({1, 0}), pt({1, 1}), pt({0, 1})},
      {{0, 1, 2}, {0, 2, 3}});
}

inline fes::Complex tetrahedron()
{
  return fes::Complex::simplicial(
      3, {pt({0, 0, 0}), pt({1, 0, 0}), pt({0, 1, 0}), pt({0, 0, 1})},
      {{0, 1, 2, 3}});
}

/// Surface of the tetrahedron (a 2-sphere), embedded in R^3.
inline fes::Complex tetra_boundary()
{
  return fes::Complex::simplicial(
      3, {pt({0, 0, 0}), pt({1, 0, 0}), pt({0, 1, 0}), pt({0, 0, 1})},
      {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}});
}

/// Square annulus: 3x3 grid of unit squares with the center removed,
/// each square split into two triangles.  Betti (1, 1, 0).
inline fes::Complex annulus()
{
  std::vector<fes::VecQ> verts;
  for (int j = 0; j <= 3; ++j)
    for (int i = 0; i <= 3; ++i) verts.push_back(pt({i, j}));
  auto vid = [](int i, int j) { return j * 4 + i; };
  std::vector<std::vector<int>> tris;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) {
      if (i == 1 && j == 1) continue;
      tris.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      tris.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  return fes::Complex::simplicial(2, verts, tris);
}

/// Structured unit-square mesh with n x n squares, each split along the
/// same diagonal; h = 1/n.
inline fes::Complex square_grid(int n)
{
  std::vector<fes::VecQ> verts;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      verts.push_back(pt({fes::Rational(i, n), fes::Rational(j, n)}));
  auto vid = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<std::vector<int>> tris;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      tris.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      tris.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  return fes::Complex::simplicial(2, verts, tris);
}

/// Two triangles agglomerated into one square 2-cell.
inline fes::Complex square_cell()
{
  fes::Complex base = two_triangles();
  int t0 = base.find_simplex({0, 1, 2});
  int t1 = base.find_simplex({0, 2, 3});
  return fes::Complex::with_cells(
      2, {pt({0, 0}), pt({1, 0}), pt({1, 1}), pt({0, 1})},
      {{0, 1, 2}, {0, 2, 3}}, {{"Q", {t0, t1}}});
}

/// Interval [0, 1] as a single edge.
inline fes::Complex interval()
{
  return fes::Complex::simplicial(1, {pt({0}), pt({1})}, {{0, 1}});
}

/// Interval [0, 1] split into two edges.
inline fes::Complex interval2()
{
  return fes::Complex::simplicial(
      1, {pt({0}), pt({fes::Rational(1, 2)}), pt({1})}, {{0, 1}, {1, 2}});
}

/// Boundary of the unit square as a closed 1-complex in R^2.
inline fes::Complex square_boundary()
{
  return fes::Complex::simplicial(
      2, {pt({0, 0}), pt({1, 0}), pt({1, 1}), pt({0, 1})},
      {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
}

}  // namespace fixtures

#endif
