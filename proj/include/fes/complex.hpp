// Cellular and simplicial complexes with exact rational geometry.
//
// Every complex carries a simplicial substrate (vertices + simplices closed
// under faces); cells are oriented agglomerations of equal-dimensional
// simplices.  For a plain simplicial complex each simplex is its own cell.
// Incidence numbers are derived from the simplicial boundary chains, which
// makes delta.delta = 0 structural.

#ifndef FES_COMPLEX_HPP
#define FES_COMPLEX_HPP

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fes/polyform.hpp"
#include "fes/rational.hpp"

namespace fes {

struct DegenerateSimplex : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonComplex : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownCell : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroCell : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotSimplicial : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotManifoldLike : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotRefinement : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Simplex {
  int id = -1;
  std::vector<int> verts;  // strictly increasing vertex ids
  int dim() const { return static_cast<int>(verts.size()) - 1; }
};

struct Cell {
  std::string id;
  int dim = 0;
  /// Support simplices with orientation signs; coherently oriented,
  /// lowest simplex id carries +1.
  std::vector<std::pair<int, int>> support;
  /// Direct boundary cells (codimension one), by cell index.
  std::vector<int> boundary;
  /// All simplices in the closure of the support, sorted by id.
  std::vector<int> closure;
};

struct AgglomerationSpec {
  std::string id;
  std::vector<int> simplices;
  /// Optional orientation hints (+-1 per support simplex).  The built
  /// cell's coherent orientation is flipped globally to match; hints that
  /// are not coherent reject the complex.
  std::map<int, int> orientation;
};

struct ComplexRefinement;
struct DualComplexResult;

class Complex {
 public:
  /// Closure of the given top simplices under faces; one cell per simplex.
  static Complex simplicial(int ambient_dim, std::vector<VecQ> vertices,
                            const std::vector<std::vector<int>>& top_simplices);

  /// Same substrate, but with declared agglomerated cells.  Simplices left
  /// uncovered (maximal ones and exposed boundary faces) become singleton
  /// cells.
  static Complex with_cells(int ambient_dim, std::vector<VecQ> vertices,
                            const std::vector<std::vector<int>>& top_simplices,
                            const std::vector<AgglomerationSpec>& declared);

  int ambient_dim() const { return ambient_dim_; }
  int dim() const;

  // --- simplicial substrate ---
  int num_vertices() const { return static_cast<int>(vertex_coords_.size()); }
  const VecQ& vertex(int v) const { return vertex_coords_[v]; }
  int num_simplices() const { return static_cast<int>(simplices_.size()); }
  const Simplex& simplex(int sid) const { return simplices_[sid]; }
  const std::vector<int>& simplices_of_dim(int k) const;
  int find_simplex(std::vector<int> verts) const;  // -1 if absent
  /// Vertex coordinates as columns, in vertex order.
  MatQ simplex_vertex_matrix(int sid) const;
  /// Chart of the simplex: standard simplex coords -> ambient.
  AffineEmbed chart(int sid) const;
  /// Chart of `small` expressed in the chart coordinates of `big`.
  AffineEmbed relative_chart(int big, int small) const;
  const std::vector<std::pair<int, int>>& simplex_facets(int sid) const;
  std::vector<int> simplex_closure(int sid) const;
  bool simplex_contains(int big, int small) const;

  // --- cells ---
  int num_cells() const { return static_cast<int>(cells_.size()); }
  const Cell& cell(int ci) const { return cells_[ci]; }
  int cell_index(const std::string& id) const;
  const std::vector<int>& cells_of_dim(int k) const;
  /// Cell whose support contains the simplex, -1 if none.
  int cell_of_simplex(int sid) const { return simplex_cell_[sid]; }
  /// All subcells of T including T, ordered by (dim, cell index).
  const std::vector<int>& subcells(int ci) const;
  bool is_subcell(int small, int big) const;
  /// Incidence number o(T, T').
  int incidence(int ci_T, int ci_Tsub) const;
  /// Exposed boundary chain of a cell: simplex id -> +-1 coefficient.
  const std::map<int, int>& boundary_chain(int ci) const;

  MatQ coboundary_matrix(int k) const;
  std::vector<int> betti_numbers() const;
  std::vector<int> betti_of(const std::vector<int>& cell_view) const;

  // --- subcomplexes ---
  std::vector<int> all_cells() const;
  std::vector<int> skeleton_cells(int m) const;
  /// Subcells of T except T itself (the boundary complex of T).
  std::vector<int> boundary_complex_cells(int ci) const;
  std::vector<int> closure_of_cells(std::vector<int> view) const;
  /// Standalone complex from a subcell-closed view; cell ids preserved.
  Complex extract(const std::vector<int>& cell_view) const;
  Complex skeleton(int m) const;
  Complex boundary_subcomplex(const std::string& cell_id) const;

  // --- refinement and duality ---
  ComplexRefinement barycentric_refinement() const;
  DualComplexResult dual_complex() const;

  bool is_pure_simplicial() const;

  /// Structural validation: boundary tiling, pairwise intersections are
  /// unions of cells, and the homological ball/sphere proxy for
  /// agglomerated cells.
  void validate(bool homological_proxy = true) const;

  /// Integral of an ambient polynomial form over an oriented cell
  /// (degree == cell dimension).
  Rational integrate_ambient(const PolyForm& u, int ci) const;

 private:
  int ambient_dim_ = 0;
  std::vector<VecQ> vertex_coords_;
  std::vector<Simplex> simplices_;
  std::map<std::vector<int>, int> simplex_lookup_;
  std::vector<std::vector<int>> simplices_by_dim_;
  std::vector<std::vector<std::pair<int, int>>> facets_;
  std::vector<std::vector<int>> cofacets_;  // sid -> simplices one dim up

  std::vector<Cell> cells_;
  std::map<std::string, int> cell_lookup_;
  std::vector<std::vector<int>> cells_by_dim_;
  std::vector<int> simplex_cell_;
  std::vector<std::vector<int>> subcells_;
  std::vector<std::map<int, int>> boundary_chains_;

  void build_substrate(int ambient_dim, std::vector<VecQ> vertices,
                       const std::vector<std::vector<int>>& top_simplices);
  void build_cells(const std::vector<AgglomerationSpec>& declared);
  void finalize_cells();
  friend class ComplexBuilder;
};

struct ComplexRefinement {
  Complex complex;
  std::vector<int> parent;  // refined simplex id -> parent simplex id
};

struct DualComplexResult {
  Complex complex;                               // cells over the refinement
  std::vector<int> bary_parent;                  // as in ComplexRefinement
  std::map<std::string, std::string> primal_of;  // dual cell id -> primal id
};

/// Cochain: one rational per k-cell, keyed by cell id.
struct Cochain {
  int degree = 0;
  std::map<std::string, Rational> values;
};

/// Refinement cochain matrix: rows = coarse k-cells, cols = fine k-cells.
MatQ refinement_cochain_map(const Complex& fine, const Complex& coarse,
                            const std::vector<int>& parent, int k);

/// Relative orientation (+-1) of a k-simplex inside a k-simplex hull.
int orientation_sign(const MatQ& verts_inner, const MatQ& verts_outer);

}  // namespace fes

#endif
