#include "fes/complex.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace fes {

namespace {

// Simplicial-level Betti numbers of a face-closed set of simplices.
std::vector<int> simplex_set_betti(const Complex& cx, const std::vector<int>& set)
{
  int maxdim = 0;
  for (int s : set) maxdim = std::max(maxdim, cx.simplex(s).dim());
  std::vector<std::vector<int>> by_dim(maxdim + 1);
  std::map<int, int> pos;
  for (int s : set) by_dim[cx.simplex(s).dim()].push_back(s);
  for (auto& v : by_dim) {
    std::sort(v.begin(), v.end());
    for (size_t i = 0; i < v.size(); ++i) pos[v[i]] = static_cast<int>(i);
  }
  std::set<int> members(set.begin(), set.end());
  std::vector<Eigen::Index> ranks(maxdim + 1, 0);
  for (int k = 0; k < maxdim; ++k) {
    MatQ delta = MatQ::Zero(static_cast<Eigen::Index>(by_dim[k + 1].size()),
                            static_cast<Eigen::Index>(by_dim[k].size()));
    for (size_t r = 0; r < by_dim[k + 1].size(); ++r)
      for (const auto& [f, c] : cx.simplex_facets(by_dim[k + 1][r])) {
        if (!members.count(f)) throw NonComplex("simplex set not face-closed");
        delta(static_cast<Eigen::Index>(r), pos[f]) = c;
      }
    ranks[k] = rank(delta);
  }
  std::vector<int> betti(maxdim + 1);
  for (int k = 0; k <= maxdim; ++k) {
    Eigen::Index nk = static_cast<Eigen::Index>(by_dim[k].size());
    Eigen::Index rk = (k < maxdim) ? ranks[k] : 0;
    Eigen::Index rkm = (k > 0) ? ranks[k - 1] : 0;
    betti[k] = static_cast<int>(nk - rk - rkm);
  }
  return betti;
}

}  // namespace

int orientation_sign(const MatQ& verts_inner, const MatQ& verts_outer)
{
  const Eigen::Index k = verts_inner.cols() - 1;
  if (verts_outer.cols() - 1 != k)
    throw NotRefinement("orientation_sign: dimension mismatch");
  MatQ ei(verts_inner.rows(), k), eo(verts_outer.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    ei.col(j) = verts_inner.col(j + 1) - verts_inner.col(0);
    eo.col(j) = verts_outer.col(j + 1) - verts_outer.col(0);
  }
  if (k == 0) return 1;
  MatQ x = solve_matrix(eo, ei, true);
  Rational det = determinant(x);
  if (det == 0) throw NotRefinement("orientation_sign: degenerate inclusion");
  return det > 0 ? 1 : -1;
}

void Complex::build_substrate(int ambient_dim, std::vector<VecQ> vertices,
                              const std::vector<std::vector<int>>& top_simplices)
{
  ambient_dim_ = ambient_dim;
  vertex_coords_ = std::move(vertices);
  for (const auto& v : vertex_coords_)
    if (static_cast<int>(v.size()) != ambient_dim)
      throw NonComplex("vertex coordinate length != ambient dimension");

  // Collect every face of every declared simplex, ordered by (dim, verts).
  std::set<std::vector<int>> faces;
  for (auto verts : top_simplices) {
    std::sort(verts.begin(), verts.end());
    if (std::adjacent_find(verts.begin(), verts.end()) != verts.end())
      throw DegenerateSimplex("repeated vertex in simplex");
    for (int v : verts)
      if (v < 0 || v >= num_vertices())
        throw NonComplex("simplex references unknown vertex");
    const size_t n = verts.size();
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      std::vector<int> face;
      for (size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) face.push_back(verts[i]);
      faces.insert(std::move(face));
    }
  }
  std::vector<std::vector<int>> ordered(faces.begin(), faces.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) {
                     if (a.size() != b.size()) return a.size() < b.size();
                     return a < b;
                   });
  simplices_.reserve(ordered.size());
  for (auto& verts : ordered) {
    Simplex s;
    s.id = static_cast<int>(simplices_.size());
    s.verts = verts;
    simplex_lookup_[s.verts] = s.id;
    simplices_.push_back(std::move(s));
  }
  int maxdim = 0;
  for (const auto& s : simplices_) maxdim = std::max(maxdim, s.dim());
  if (maxdim > ambient_dim_)
    throw DegenerateSimplex("simplex dimension exceeds ambient dimension");
  simplices_by_dim_.assign(maxdim + 1, {});
  for (const auto& s : simplices_) simplices_by_dim_[s.dim()].push_back(s.id);

  // Affine independence of every simplex.
  for (const auto& s : simplices_) {
    if (s.dim() == 0) continue;
    MatQ edges(ambient_dim_, s.dim());
    for (int j = 1; j <= s.dim(); ++j)
      edges.col(j - 1) = vertex_coords_[s.verts[j]] - vertex_coords_[s.verts[0]];
    if (rank(edges) != s.dim())
      throw DegenerateSimplex("affinely dependent simplex vertices");
  }

  facets_.assign(simplices_.size(), {});
  cofacets_.assign(simplices_.size(), {});
  for (const auto& s : simplices_) {
    if (s.dim() == 0) continue;
    for (size_t i = 0; i < s.verts.size(); ++i) {
      std::vector<int> face = s.verts;
      face.erase(face.begin() + static_cast<long>(i));
      auto it = simplex_lookup_.find(face);
      if (it == simplex_lookup_.end()) throw NonComplex("face closure broken");
      int sign = (i % 2 == 0) ? 1 : -1;
      facets_[s.id].push_back({it->second, sign});
      cofacets_[it->second].push_back(s.id);
    }
  }
}

namespace {

struct PendingCell {
  std::string id;
  int dim;
  std::vector<std::pair<int, int>> support;
  std::map<int, int> chain;    // exposed boundary simplices with coefficients
  std::map<int, int> desired;  // optional orientation hints
};

}  // namespace

// Coherent orientation of a support: signs such that interior facet
// contributions cancel.  Lowest simplex id gets +1.
static void orient_support(const Complex& cx, PendingCell& cell)
{
  const auto& supp = cell.support;
  if (cell.dim == 0) {
    if (supp.size() != 1) throw NonComplex("0-cell with non-singleton support");
    return;
  }
  std::map<int, std::vector<std::pair<size_t, int>>> by_facet;
  for (size_t i = 0; i < supp.size(); ++i)
    for (const auto& [f, c] : cx.simplex_facets(supp[i].first))
      by_facet[f].push_back({i, c});
  std::vector<int> sign(supp.size(), 0);
  sign[0] = 1;
  std::vector<size_t> stack{0};
  while (!stack.empty()) {
    size_t i = stack.back();
    stack.pop_back();
    for (const auto& [f, c] : cx.simplex_facets(supp[i].first)) {
      const auto& sharers = by_facet[f];
      if (sharers.size() > 2)
        throw NonComplex("cell support folds over a facet: " + cell.id);
      if (sharers.size() != 2) continue;
      for (const auto& [j, cj] : sharers) {
        if (j == i) continue;
        int ci = 0;
        for (const auto& [jj, cc] : sharers)
          if (jj == i) ci = cc;
        int needed = -sign[i] * ci * cj;  // cancel: s_i c_i + s_j c_j = 0
        if (sign[j] == 0) {
          sign[j] = needed;
          stack.push_back(j);
        } else if (sign[j] != needed) {
          throw NonComplex("cell support not orientable: " + cell.id);
        }
      }
    }
  }
  for (size_t i = 0; i < supp.size(); ++i)
    if (sign[i] == 0)
      throw NonComplex("cell support not facet-connected: " + cell.id);
  for (size_t i = 0; i < supp.size(); ++i) cell.support[i].second = sign[i];

  for (const auto& [f, sharers] : by_facet) {
    int coeff = 0;
    for (const auto& [i, c] : sharers) coeff += sign[i] * c;
    if (coeff != 0) {
      if (coeff != 1 && coeff != -1)
        throw NonComplex("non-unit boundary coefficient: " + cell.id);
      cell.chain[f] = coeff;
    }
  }
}

void Complex::build_cells(const std::vector<AgglomerationSpec>& declared)
{
  const int maxdim = static_cast<int>(simplices_by_dim_.size()) - 1;

  std::vector<std::vector<PendingCell>> pending(maxdim + 1);
  // covered[dim] : simplex id -> true when some cell's support holds it
  std::vector<std::set<int>> covered(maxdim + 1);
  std::set<std::string> used_ids;

  auto add_cell = [&](PendingCell pc) {
    if (!used_ids.insert(pc.id).second)
      throw NonComplex("duplicate cell id: " + pc.id);
    for (const auto& [s, sgn] : pc.support)
      if (!covered[pc.dim].insert(s).second)
        throw NonComplex("overlapping cell supports at simplex " +
                         std::to_string(s));
    orient_support(*this, pc);
    if (!pc.desired.empty()) {
      int flip = 0;
      for (const auto& [s, sgn] : pc.support) {
        auto it = pc.desired.find(s);
        if (it == pc.desired.end()) continue;
        int f = it->second * sgn;
        if (f != 1 && f != -1)
          throw NonComplex("orientation hint must be +-1 on " + pc.id);
        if (flip == 0) flip = f;
        if (f != flip)
          throw NonComplex("orientation hints are not coherent on " + pc.id);
      }
      if (flip == -1) {
        for (auto& [s, sgn] : pc.support) sgn = -sgn;
        for (auto& [f, c] : pc.chain) c = -c;
      }
    }
    pending[pc.dim].push_back(std::move(pc));
  };

  for (const auto& spec : declared) {
    if (spec.simplices.empty()) throw NonComplex("empty cell support");
    PendingCell pc;
    pc.id = spec.id;
    std::set<int> uniq(spec.simplices.begin(), spec.simplices.end());
    if (uniq.size() != spec.simplices.size())
      throw NonComplex("repeated simplex in cell support");
    for (int s : spec.simplices) {
      if (s < 0 || s >= num_simplices())
        throw NonComplex("cell references unknown simplex");
      pc.support.push_back({s, 1});
    }
    pc.desired = spec.orientation;
    std::sort(pc.support.begin(), pc.support.end());
    pc.dim = simplices_[pc.support[0].first].dim();
    for (const auto& [s, sgn] : pc.support)
      if (simplices_[s].dim() != pc.dim)
        throw NonComplex("mixed-dimension cell support: " + spec.id);
    add_cell(std::move(pc));
  }

  auto auto_cell = [&](int sid) {
    PendingCell pc;
    pc.id = "s" + std::to_string(sid);
    pc.dim = simplices_[sid].dim();
    pc.support = {{sid, 1}};
    add_cell(std::move(pc));
  };

  // Maximal simplices not covered by a declared cell become singletons.
  for (const auto& s : simplices_)
    if (cofacets_[s.id].empty() && !covered[s.dim()].count(s.id))
      auto_cell(s.id);

  // Close boundaries downward.
  for (int m = maxdim; m >= 1; --m)
    for (size_t i = 0; i < pending[m].size(); ++i)
      for (const auto& [f, c] : pending[m][i].chain)
        if (!covered[m - 1].count(f)) auto_cell(f);

  // Flatten ordered by (dim, declaration order).
  cells_.clear();
  for (int m = 0; m <= maxdim; ++m)
    for (auto& pc : pending[m]) {
      Cell cell;
      cell.id = std::move(pc.id);
      cell.dim = pc.dim;
      cell.support = std::move(pc.support);
      int ci = static_cast<int>(cells_.size());
      cells_.push_back(std::move(cell));
      boundary_chains_.push_back(std::move(pc.chain));
      cell_lookup_[cells_.back().id] = ci;
    }
}

void Complex::finalize_cells()
{
  const int maxdim = static_cast<int>(simplices_by_dim_.size()) - 1;
  cells_by_dim_.assign(maxdim + 1, {});
  simplex_cell_.assign(simplices_.size(), -1);
  for (int ci = 0; ci < num_cells(); ++ci) {
    cells_by_dim_[cells_[ci].dim].push_back(ci);
    for (const auto& [s, sgn] : cells_[ci].support) {
      simplex_cell_[s] = ci;
      for (int f : simplex_closure(s)) cells_[ci].closure.push_back(f);
    }
    auto& cl = cells_[ci].closure;
    std::sort(cl.begin(), cl.end());
    cl.erase(std::unique(cl.begin(), cl.end()), cl.end());
  }

  // Boundary cells: every exposed facet must be covered by a cell whose
  // support tiles the exposure with a consistent sign.
  for (int ci = 0; ci < num_cells(); ++ci) {
    const auto& chain = boundary_chains_[ci];
    std::set<int> bnd;
    for (const auto& [f, c] : chain) {
      int bc = simplex_cell_[f];
      if (bc < 0) throw NonComplex("exposed facet not covered by any cell");
      if (cells_[bc].dim != cells_[ci].dim - 1)
        throw NonComplex("boundary cell of wrong dimension");
      bnd.insert(bc);
    }
    for (int bc : bnd) {
      int o = 0;
      for (const auto& [s, sgn] : cells_[bc].support) {
        auto it = chain.find(s);
        if (it == chain.end())
          throw NonComplex("boundary cell leaks outside the exposure of " +
                           cells_[ci].id);
        int here = it->second * sgn;
        if (o == 0) o = here;
        if (o != here)
          throw NonComplex("inconsistent incidence over boundary cell " +
                           cells_[bc].id);
      }
    }
    cells_[ci].boundary.assign(bnd.begin(), bnd.end());
  }

  // Subcell lattice.
  subcells_.assign(cells_.size(), {});
  for (int ci = 0; ci < num_cells(); ++ci) {
    std::set<int> subs;
    std::set<int> closure_set(cells_[ci].closure.begin(),
                              cells_[ci].closure.end());
    for (int s : cells_[ci].closure) {
      int w = simplex_cell_[s];
      if (w < 0) continue;
      bool inside = true;
      for (int t : cells_[w].closure)
        if (!closure_set.count(t)) inside = false;
      if (inside) subs.insert(w);
    }
    std::vector<int> ordered(subs.begin(), subs.end());
    std::sort(ordered.begin(), ordered.end(), [&](int a, int b) {
      if (cells_[a].dim != cells_[b].dim) return cells_[a].dim < cells_[b].dim;
      return a < b;
    });
    subcells_[ci] = std::move(ordered);
    if (subcells_[ci].empty() || subcells_[ci].back() != ci)
      throw NonComplex("cell not maximal in its own closure: " +
                       cells_[ci].id);
  }

  // Purity of the boundary: every proper subcell sits under a direct
  // boundary cell; restriction constraints may then follow covering pairs.
  auto closure_contained = [&](int small, int big) {
    const auto& cb = cells_[big].closure;
    for (int s : cells_[small].closure)
      if (!std::binary_search(cb.begin(), cb.end(), s)) return false;
    return true;
  };
  for (int ci = 0; ci < num_cells(); ++ci) {
    for (int w : subcells_[ci]) {
      if (w == ci || cells_[w].dim >= cells_[ci].dim - 1) continue;
      bool found = false;
      for (int bc : cells_[ci].boundary)
        if (closure_contained(w, bc)) found = true;
      if (!found)
        throw NonComplex("subcell not contained in any boundary cell of " +
                         cells_[ci].id);
    }
  }
}

bool Complex::is_subcell(int small, int big) const
{
  const auto& subs = subcells_[big];
  return std::find(subs.begin(), subs.end(), small) != subs.end();
}

Complex Complex::simplicial(int ambient_dim, std::vector<VecQ> vertices,
                            const std::vector<std::vector<int>>& top_simplices)
{
  return with_cells(ambient_dim, std::move(vertices), top_simplices, {});
}

Complex Complex::with_cells(int ambient_dim, std::vector<VecQ> vertices,
                            const std::vector<std::vector<int>>& top_simplices,
                            const std::vector<AgglomerationSpec>& declared)
{
  Complex cx;
  cx.build_substrate(ambient_dim, std::move(vertices), top_simplices);
  cx.build_cells(declared);
  cx.finalize_cells();
  return cx;
}

int Complex::dim() const
{
  return static_cast<int>(simplices_by_dim_.size()) - 1;
}

const std::vector<int>& Complex::simplices_of_dim(int k) const
{
  static const std::vector<int> empty;
  if (k < 0 || k >= static_cast<int>(simplices_by_dim_.size())) return empty;
  return simplices_by_dim_[k];
}

int Complex::find_simplex(std::vector<int> verts) const
{
  std::sort(verts.begin(), verts.end());
  auto it = simplex_lookup_.find(verts);
  return it == simplex_lookup_.end() ? -1 : it->second;
}

MatQ Complex::simplex_vertex_matrix(int sid) const
{
  const auto& s = simplices_[sid];
  MatQ verts(ambient_dim_, s.verts.size());
  for (size_t j = 0; j < s.verts.size(); ++j)
    verts.col(static_cast<Eigen::Index>(j)) = vertex_coords_[s.verts[j]];
  return verts;
}

AffineEmbed Complex::chart(int sid) const
{
  return AffineEmbed::simplex_chart(simplex_vertex_matrix(sid));
}

AffineEmbed Complex::relative_chart(int big, int small) const
{
  AffineEmbed cb = chart(big), cs = chart(small);
  MatQ rhs(ambient_dim_, cs.source_dim() + 1);
  rhs.col(0) = cs.offset - cb.offset;
  rhs.rightCols(cs.source_dim()) = cs.linear;
  MatQ sol = solve_matrix(cb.linear, rhs, true);
  AffineEmbed out;
  out.offset = sol.col(0);
  out.linear = sol.rightCols(cs.source_dim());
  return out;
}

const std::vector<std::pair<int, int>>& Complex::simplex_facets(int sid) const
{
  return facets_[sid];
}

std::vector<int> Complex::simplex_closure(int sid) const
{
  std::vector<int> out;
  std::set<int> seen;
  std::vector<int> stack{sid};
  while (!stack.empty()) {
    int s = stack.back();
    stack.pop_back();
    if (!seen.insert(s).second) continue;
    out.push_back(s);
    for (const auto& [f, c] : facets_[s]) stack.push_back(f);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool Complex::simplex_contains(int big, int small) const
{
  const auto& vb = simplices_[big].verts;
  const auto& vs = simplices_[small].verts;
  return std::includes(vb.begin(), vb.end(), vs.begin(), vs.end());
}

int Complex::cell_index(const std::string& id) const
{
  auto it = cell_lookup_.find(id);
  if (it == cell_lookup_.end()) throw UnknownCell("unknown cell: " + id);
  return it->second;
}

const std::vector<int>& Complex::cells_of_dim(int k) const
{
  static const std::vector<int> empty;
  if (k < 0 || k >= static_cast<int>(cells_by_dim_.size())) return empty;
  return cells_by_dim_[k];
}

const std::vector<int>& Complex::subcells(int ci) const { return subcells_[ci]; }

const std::map<int, int>& Complex::boundary_chain(int ci) const
{
  return boundary_chains_[ci];
}

int Complex::incidence(int ci_T, int ci_sub) const
{
  if (ci_T < 0 || ci_T >= num_cells() || ci_sub < 0 || ci_sub >= num_cells())
    throw UnknownCell("incidence: cell index out of range");
  const Cell& t = cells_[ci_T];
  const Cell& b = cells_[ci_sub];
  if (b.dim != t.dim - 1) return 0;
  const auto& chain = boundary_chains_[ci_T];
  const auto& [s0, sgn0] = b.support[0];
  auto it = chain.find(s0);
  if (it == chain.end()) return 0;
  return it->second * sgn0;
}

MatQ Complex::coboundary_matrix(int k) const
{
  const auto& rows = cells_of_dim(k + 1);
  const auto& cols = cells_of_dim(k);
  MatQ delta = MatQ::Zero(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(cols.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (int bc : cells_[rows[i]].boundary) {
      auto it = std::find(cols.begin(), cols.end(), bc);
      delta(static_cast<Eigen::Index>(i), it - cols.begin()) =
          incidence(rows[i], bc);
    }
  return delta;
}

std::vector<int> Complex::betti_numbers() const { return betti_of(all_cells()); }

std::vector<int> Complex::betti_of(const std::vector<int>& view) const
{
  int maxdim = 0;
  for (int ci : view) maxdim = std::max(maxdim, cells_[ci].dim);
  std::vector<std::vector<int>> by_dim(maxdim + 1);
  std::map<int, int> pos;
  for (int ci : view) by_dim[cells_[ci].dim].push_back(ci);
  for (auto& v : by_dim) {
    std::sort(v.begin(), v.end());
    for (size_t i = 0; i < v.size(); ++i) pos[v[i]] = static_cast<int>(i);
  }
  std::vector<Eigen::Index> ranks(maxdim + 1, 0);
  for (int k = 0; k < maxdim; ++k) {
    MatQ delta = MatQ::Zero(static_cast<Eigen::Index>(by_dim[k + 1].size()),
                            static_cast<Eigen::Index>(by_dim[k].size()));
    for (size_t r = 0; r < by_dim[k + 1].size(); ++r)
      for (int bc : cells_[by_dim[k + 1][r]].boundary) {
        auto it = pos.find(bc);
        if (it == pos.end())
          throw NonComplex("cell view is not boundary-closed");
        delta(static_cast<Eigen::Index>(r), it->second) =
            incidence(by_dim[k + 1][r], bc);
      }
    ranks[k] = rank(delta);
  }
  std::vector<int> betti(maxdim + 1);
  for (int k = 0; k <= maxdim; ++k) {
    Eigen::Index nk = static_cast<Eigen::Index>(by_dim[k].size());
    Eigen::Index rk = (k < maxdim) ? ranks[k] : 0;
    Eigen::Index rkm = (k > 0) ? ranks[k - 1] : 0;
    betti[k] = static_cast<int>(nk - rk - rkm);
  }
  return betti;
}

std::vector<int> Complex::all_cells() const
{
  std::vector<int> out(cells_.size());
  for (int i = 0; i < num_cells(); ++i) out[i] = i;
  return out;
}

std::vector<int> Complex::skeleton_cells(int m) const
{
  std::vector<int> out;
  for (int ci = 0; ci < num_cells(); ++ci)
    if (cells_[ci].dim <= m) out.push_back(ci);
  return out;
}

std::vector<int> Complex::boundary_complex_cells(int ci) const
{
  if (cells_[ci].dim == 0) throw ZeroCell("0-cell has no boundary complex");
  std::vector<int> out;
  for (int w : subcells_[ci])
    if (w != ci) out.push_back(w);
  return out;
}

std::vector<int> Complex::closure_of_cells(std::vector<int> view) const
{
  std::set<int> out;
  for (int ci : view)
    for (int w : subcells_[ci]) out.insert(w);
  return std::vector<int>(out.begin(), out.end());
}

Complex Complex::extract(const std::vector<int>& cell_view) const
{
  // Collect closure simplices.
  std::set<int> sids;
  for (int ci : cell_view)
    for (int s : cells_[ci].closure) sids.insert(s);
  // Maximal members of the set.
  std::vector<std::vector<int>> tops;
  for (int s : sids) {
    bool maximal = true;
    for (int cf : cofacets_[s])
      if (sids.count(cf)) maximal = false;
    if (maximal) tops.push_back(simplices_[s].verts);
  }
  std::vector<AgglomerationSpec> specs;
  std::vector<int> ordered = cell_view;
  std::sort(ordered.begin(), ordered.end());
  Complex out;
  out.build_substrate(ambient_dim_, vertex_coords_, tops);
  for (int ci : ordered) {
    AgglomerationSpec spec;
    spec.id = cells_[ci].id;
    for (const auto& [s, sgn] : cells_[ci].support) {
      int ns = out.find_simplex(simplices_[s].verts);
      if (ns < 0) throw NonComplex("extract lost a support simplex");
      spec.simplices.push_back(ns);
    }
    specs.push_back(std::move(spec));
  }
  out.build_cells(specs);
  out.finalize_cells();
  if (out.num_cells() != static_cast<int>(cell_view.size()))
    throw NonComplex("extract: view was not subcell-closed");
  return out;
}

Complex Complex::skeleton(int m) const
{
  if (m < 0 || m > dim()) throw NonComplex("skeleton: dimension out of range");
  return extract(skeleton_cells(m));
}

Complex Complex::boundary_subcomplex(const std::string& cell_id) const
{
  return extract(boundary_complex_cells(cell_index(cell_id)));
}

bool Complex::is_pure_simplicial() const
{
  for (const auto& c : cells_)
    if (c.support.size() != 1) return false;
  return true;
}

ComplexRefinement Complex::barycentric_refinement() const
{
  if (!is_pure_simplicial())
    throw NotSimplicial("barycentric refinement needs a simplicial complex");
  // One refined vertex per simplex: its barycenter.
  std::vector<VecQ> verts(simplices_.size());
  for (const auto& s : simplices_) {
    VecQ b = VecQ::Zero(ambient_dim_);
    for (int v : s.verts) b += vertex_coords_[v];
    verts[s.id] = b / Rational(static_cast<long>(s.verts.size()));
  }
  // Complete flags of maximal simplices; simplex ids increase with
  // dimension, so flags are sorted vertex tuples.
  std::vector<std::vector<int>> tops;
  std::function<void(int, std::vector<int>&)> descend = [&](int s,
                                                            std::vector<int>& flag) {
    flag.push_back(s);
    if (simplices_[s].dim() == 0) {
      std::vector<int> rev(flag.rbegin(), flag.rend());
      tops.push_back(std::move(rev));
    } else {
      for (const auto& [f, c] : facets_[s]) descend(f, flag);
    }
    flag.pop_back();
  };
  for (const auto& s : simplices_)
    if (cofacets_[s.id].empty()) {
      std::vector<int> flag;
      descend(s.id, flag);
    }
  ComplexRefinement ref;
  ref.complex = simplicial(ambient_dim_, std::move(verts), tops);
  ref.parent.assign(ref.complex.num_simplices(), -1);
  for (const auto& rs : ref.complex.simplices_)
    ref.parent[rs.id] = rs.verts.back();  // chain maximum: largest dimension
  return ref;
}

DualComplexResult Complex::dual_complex() const
{
  if (!is_pure_simplicial())
    throw NotSimplicial("dual complex needs a simplicial complex");
  const int d = dim();
  for (const auto& s : simplices_)
    if (cofacets_[s.id].empty() && s.dim() != d)
      throw NotManifoldLike("complex is not pure of top dimension");
  for (int f : simplices_of_dim(d - 1))
    if (cofacets_[f].size() > 2)
      throw NotManifoldLike("facet with more than two cofaces");

  DualComplexResult out;
  auto ref = barycentric_refinement();
  out.bary_parent = std::move(ref.parent);
  Complex& fine = ref.complex;

  // Boundary simplices of the primal complex.
  std::set<int> boundary;
  for (int f : simplices_of_dim(d - 1))
    if (cofacets_[f].size() == 1)
      for (int s : simplex_closure(f)) boundary.insert(s);

  // Ascending chains sigma = c_0 < c_1 < ... with consecutive dimensions.
  auto chains_from = [&](int sigma, int topdim,
                         const std::set<int>* restrict_to) {
    std::vector<std::vector<int>> chains;
    std::function<void(std::vector<int>&)> ascend = [&](std::vector<int>& c) {
      int s = c.back();
      if (simplices_[s].dim() == topdim) {
        chains.push_back(c);
        return;
      }
      for (int cf : cofacets_[s]) {
        if (restrict_to && !restrict_to->count(cf)) continue;
        c.push_back(cf);
        ascend(c);
        c.pop_back();
      }
    };
    std::vector<int> c{sigma};
    ascend(c);
    return chains;
  };

  auto chain_cells = [&](const std::vector<std::vector<int>>& chains) {
    std::vector<int> support;
    for (const auto& chain : chains) {
      int rs = fine.find_simplex(chain);
      if (rs < 0) throw NonComplex("missing refined simplex for a flag");
      support.push_back(rs);
    }
    std::sort(support.begin(), support.end());
    return support;
  };

  std::vector<AgglomerationSpec> specs;
  for (const auto& s : simplices_) {
    AgglomerationSpec spec;
    spec.id = "D." + cells_[simplex_cell_[s.id]].id;
    spec.simplices = chain_cells(chains_from(s.id, d, nullptr));
    out.primal_of[spec.id] = cells_[simplex_cell_[s.id]].id;
    specs.push_back(std::move(spec));
  }
  for (const auto& s : simplices_) {
    if (!boundary.count(s.id)) continue;
    AgglomerationSpec spec;
    spec.id = "B." + cells_[simplex_cell_[s.id]].id;
    spec.simplices = chain_cells(chains_from(s.id, d - 1, &boundary));
    out.primal_of[spec.id] = cells_[simplex_cell_[s.id]].id;
    specs.push_back(std::move(spec));
  }

  std::vector<VecQ> fine_verts;
  for (int v = 0; v < fine.num_vertices(); ++v)
    fine_verts.push_back(fine.vertex(v));
  std::vector<std::vector<int>> fine_tops;
  for (const auto& s : fine.simplices_)
    if (fine.cofacets_[s.id].empty()) fine_tops.push_back(s.verts);
  out.complex = with_cells(ambient_dim_, fine_verts, fine_tops, specs);
  return out;
}

void Complex::validate(bool homological_proxy) const
{
  // Pairwise intersections of cells must be unions of cells.
  for (int a = 0; a < num_cells(); ++a) {
    std::set<int> ca(cells_[a].closure.begin(), cells_[a].closure.end());
    for (int b = a + 1; b < num_cells(); ++b) {
      std::vector<int> inter;
      for (int s : cells_[b].closure)
        if (ca.count(s)) inter.push_back(s);
      if (inter.empty()) continue;
      std::set<int> inter_set(inter.begin(), inter.end());
      std::set<int> covered;
      for (int s : inter) {
        int w = simplex_cell_[s];
        if (w < 0) continue;
        bool inside = true;
        for (int t : cells_[w].closure)
          if (!inter_set.count(t)) inside = false;
        if (inside)
          for (int t : cells_[w].closure) covered.insert(t);
      }
      if (covered != inter_set)
        throw NonComplex("cell intersection is not a union of cells: " +
                         cells_[a].id + " & " + cells_[b].id);
    }
  }
  if (!homological_proxy) return;
  for (int ci = 0; ci < num_cells(); ++ci) {
    if (cells_[ci].dim == 0) continue;
    if (cells_[ci].support.size() == 1) continue;  // plain simplex
    auto betti = simplex_set_betti(*this, cells_[ci].closure);
    if (betti[0] != 1) throw NonComplex("cell not connected: " + cells_[ci].id);
    for (size_t k = 1; k < betti.size(); ++k)
      if (betti[k] != 0)
        throw NonComplex("cell not contractible: " + cells_[ci].id);
    std::set<int> bset;
    for (const auto& [f, c] : boundary_chains_[ci])
      for (int s : simplex_closure(f)) bset.insert(s);
    auto bbetti =
        simplex_set_betti(*this, std::vector<int>(bset.begin(), bset.end()));
    const int m = cells_[ci].dim;
    std::vector<int> want(m, 0);
    want[0] = 1;
    if (m >= 2) want[m - 1] += 1;
    else want[0] = 2;  // S^0: two points
    bbetti.resize(want.size(), 0);
    if (bbetti != want)
      throw NonComplex("cell boundary is not a sphere: " + cells_[ci].id);
  }
}

Rational Complex::integrate_ambient(const PolyForm& u, int ci) const
{
  const Cell& c = cells_[ci];
  if (u.degree() != c.dim)
    throw DegreeMismatch("integrate_ambient: degree != cell dimension");
  Rational total(0);
  for (const auto& [s, sgn] : c.support)
    total += Rational(sgn) * integrate_simplex(u, simplex_vertex_matrix(s));
  return total;
}

MatQ refinement_cochain_map(const Complex& fine, const Complex& coarse,
                            const std::vector<int>& parent, int k)
{
  if (static_cast<int>(parent.size()) != fine.num_simplices())
    throw NotRefinement("parent map length != fine simplex count");
  const auto& rows = coarse.cells_of_dim(k);
  const auto& cols = fine.cells_of_dim(k);
  MatQ iota = MatQ::Zero(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(cols.size()));
  std::map<int, Eigen::Index> row_of;
  for (size_t i = 0; i < rows.size(); ++i)
    row_of[rows[i]] = static_cast<Eigen::Index>(i);
  for (size_t j = 0; j < cols.size(); ++j) {
    const Cell& fc = fine.cell(cols[j]);
    if (fc.support.size() != 1)
      throw NotRefinement("fine complex must be simplicial");
    int fs = fc.support[0].first;
    int p = parent[fs];
    if (p < 0 || p >= coarse.num_simplices())
      throw NotRefinement("parent simplex out of range");
    if (coarse.simplex(p).dim() != k) continue;
    int pc = coarse.cell_of_simplex(p);
    if (pc < 0) continue;
    int psign = 0;
    for (const auto& [s, sgn] : coarse.cell(pc).support)
      if (s == p) psign = sgn;
    int rel = orientation_sign(fine.simplex_vertex_matrix(fs),
                               coarse.simplex_vertex_matrix(p));
    iota(row_of[pc], static_cast<Eigen::Index>(j)) =
        Rational(rel * psign * fc.support[0].second);
  }
  return iota;
}

}  // namespace fes
