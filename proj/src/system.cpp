#include "fes/system.hpp"

#include <algorithm>
#include <json.hpp>
#include <set>
#include <thread>

namespace fes {

namespace {

// Stacked chart-coefficient coordinates over a set of simplices; the key
// list per simplex is the union over the participating forms.
struct Stacked {
  std::vector<int> sids;
  std::map<int, std::vector<TermKey>> keys;
  std::map<int, Eigen::Index> offset;
  Eigen::Index total = 0;
};

Stacked make_stacked(const std::vector<int>& sids,
                     const std::vector<const CellForm*>& forms)
{
  Stacked st;
  st.sids = sids;
  std::sort(st.sids.begin(), st.sids.end());
  for (int s : st.sids) {
    std::set<TermKey> keyset;
    for (const CellForm* f : forms)
      if (f->has_part(s))
        for (const auto& [key, c] : f->part(s).terms()) keyset.insert(key);
    st.keys[s] = std::vector<TermKey>(keyset.begin(), keyset.end());
    st.offset[s] = st.total;
    st.total += static_cast<Eigen::Index>(st.keys[s].size());
  }
  return st;
}

VecQ stack_coeffs(const Stacked& st, const CellForm& u)
{
  VecQ out = VecQ::Zero(st.total);
  for (int s : st.sids) {
    if (!u.has_part(s)) continue;
    const auto& keys = st.keys.at(s);
    std::map<TermKey, Eigen::Index> where;
    for (size_t i = 0; i < keys.size(); ++i)
      where.emplace(keys[i], static_cast<Eigen::Index>(i));
    for (const auto& [key, c] : u.part(s).terms()) {
      auto it = where.find(key);
      if (it == where.end())
        throw NotInSpace("form has a term outside the stacked key space");
      out(st.offset.at(s) + it->second) = c;
    }
  }
  return out;
}

MatQ stack_all(const Stacked& st, const std::vector<CellForm>& forms)
{
  MatQ out(st.total, static_cast<Eigen::Index>(forms.size()));
  for (size_t j = 0; j < forms.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = stack_coeffs(st, forms[j]);
  return out;
}

std::vector<const CellForm*> pointers(const std::vector<CellForm>& forms)
{
  std::vector<const CellForm*> out;
  out.reserve(forms.size());
  for (const auto& f : forms) out.push_back(&f);
  return out;
}

}  // namespace

bool CellForm::is_zero() const
{
  for (const auto& [s, f] : parts_)
    if (!f.is_zero()) return false;
  return true;
}

const PolyForm& CellForm::part(int sid) const
{
  auto it = parts_.find(sid);
  if (it == parts_.end())
    throw NotInSpace("missing chart part on simplex " + std::to_string(sid));
  return it->second;
}

void CellForm::set_part(int sid, PolyForm f) { parts_[sid] = std::move(f); }

CellForm CellForm::restricted(const std::vector<int>& sids) const
{
  CellForm out(degree_);
  for (int s : sids) out.set_part(s, part(s));
  return out;
}

CellForm& CellForm::operator+=(const CellForm& o)
{
  if (parts_.empty()) {
    *this = o;
    return *this;
  }
  if (degree_ != o.degree_) throw DegreeMismatch("family sum: degree mismatch");
  for (auto& [s, f] : parts_) f += o.part(s);
  return *this;
}

CellForm& CellForm::operator*=(const Rational& c)
{
  for (auto& [s, f] : parts_) f *= c;
  return *this;
}

CellForm d(const CellForm& u)
{
  CellForm out(u.degree() + 1);
  for (const auto& [s, f] : u.parts()) {
    PolyForm df = d(f);
    if (df.degree() != u.degree() + 1)
      df = zero_form(f.dim(), std::min(f.dim(), u.degree() + 1));
    out.set_part(s, df);
  }
  return out;
}

CellForm ambient_to_cell(const Complex& cx, const std::vector<int>& sids,
                         const PolyForm& u)
{
  CellForm out(u.degree());
  for (int s : sids) {
    const int m = cx.simplex(s).dim();
    PolyForm pb = (u.degree() <= m) ? pullback(cx.chart(s), u)
                                    : zero_form(m, m);
    if (pb.degree() != u.degree()) pb = zero_form(m, std::min(m, u.degree()));
    out.set_part(s, pb);
  }
  return out;
}

CellForm complete_from_support(const Complex& cx, int ci,
                               std::map<int, PolyForm> support_parts)
{
  const Cell& cell = cx.cell(ci);
  int degree = 0;
  for (const auto& [s, f] : support_parts) degree = f.degree();
  CellForm out(degree);
  for (auto& [s, f] : support_parts) out.set_part(s, std::move(f));

  // Process by decreasing dimension so cofaces are available.
  std::vector<int> order = cell.closure;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (cx.simplex(a).dim() != cx.simplex(b).dim())
      return cx.simplex(a).dim() > cx.simplex(b).dim();
    return a < b;
  });
  for (int s : order) {
    bool assigned = out.has_part(s);
    for (int t : cell.closure) {
      if (t == s || !out.has_part(t)) continue;
      bool covering = false;
      for (const auto& [f, c] : cx.simplex_facets(t))
        if (f == s) covering = true;
      if (!covering) continue;
      const int m = cx.simplex(s).dim();
      PolyForm tr = (out.degree() <= m)
                        ? pullback(cx.relative_chart(t, s), out.part(t))
                        : zero_form(m, m);
      if (tr.degree() != out.degree())
        tr = zero_form(m, std::min(m, out.degree()));
      if (!assigned) {
        out.set_part(s, tr);
        assigned = true;
      } else if (!(out.part(s) == tr)) {
        throw NotInSpace("trace mismatch on simplex " + std::to_string(s));
      }
    }
    if (!assigned)
      throw NotInSpace("no coface provided a trace for simplex " +
                       std::to_string(s));
  }
  return out;
}

Rational integrate_cell(const Complex& cx, int ci, const CellForm& u)
{
  const Cell& cell = cx.cell(ci);
  if (u.degree() != cell.dim)
    throw DegreeMismatch("integrate_cell: degree != cell dimension");
  Rational total(0);
  for (const auto& [s, sgn] : cell.support)
    total += Rational(sgn) * integrate_std(u.part(s));
  return total;
}

ElementSystem::ElementSystem(const Complex& cx) : cx_(&cx)
{
  bases_.resize(static_cast<size_t>(cx.num_cells()));
}

void ElementSystem::set_basis(int ci, int k, std::vector<CellForm> basis)
{
  for (const auto& f : basis)
    if (f.degree() != k) throw DegreeMismatch("basis form of wrong degree");
  bases_[static_cast<size_t>(ci)][k] = std::move(basis);
}

const std::vector<CellForm>& ElementSystem::basis(int ci, int k) const
{
  static const std::vector<CellForm> empty;
  const auto& per_k = bases_[static_cast<size_t>(ci)];
  auto it = per_k.find(k);
  return it == per_k.end() ? empty : it->second;
}

Eigen::Index ElementSystem::space_dim(int ci, int k) const
{
  return static_cast<Eigen::Index>(basis(ci, k).size());
}

VecQ ElementSystem::coords_of(int ci, int k, const CellForm& u) const
{
  const auto& b = basis(ci, k);
  if (b.empty()) {
    if (!u.is_zero()) throw NotInSpace("nonzero form in a zero space");
    return VecQ::Zero(0);
  }
  auto ptrs = pointers(b);
  ptrs.push_back(&u);
  Stacked st = make_stacked(cx_->cell(ci).closure, ptrs);
  MatQ bm = stack_all(st, b);
  VecQ uv = stack_coeffs(st, u);
  try {
    return solve(bm, uv, true);
  } catch (const InconsistentSystem&) {
    throw NotInSpace("form not in A^k(" + cx_->cell(ci).id + ")");
  }
}

CellForm ElementSystem::from_coords(int ci, int k, const VecQ& coords) const
{
  const auto& b = basis(ci, k);
  if (static_cast<Eigen::Index>(b.size()) != coords.size())
    throw NotInSpace("coordinate length mismatch");
  CellForm out(k);
  for (int s : cx_->cell(ci).closure) {
    const int m = cx_->simplex(s).dim();
    PolyForm acc = zero_form(m, std::min(m, k));
    for (size_t j = 0; j < b.size(); ++j) {
      if (coords(static_cast<Eigen::Index>(j)) == 0) continue;
      acc += coords(static_cast<Eigen::Index>(j)) * b[j].part(s);
    }
    out.set_part(s, acc);
  }
  return out;
}

bool ElementSystem::contains(int ci, int k, const CellForm& u) const
{
  try {
    coords_of(ci, k, u);
    return true;
  } catch (const NotInSpace&) {
    return false;
  }
}

bool ElementSystem::has_constants(int ci) const
{
  CellForm one(0);
  for (int s : cx_->cell(ci).closure)
    one.set_part(s, constant_form(cx_->simplex(s).dim(), 0, Rational(1)));
  return contains(ci, 0, one);
}

MatQ ElementSystem::restriction(int big, int small, int k) const
{
  {
    std::lock_guard<std::mutex> lock(cache_->mutex);
    auto it = cache_->restriction.find({big, small, k});
    if (it != cache_->restriction.end()) return it->second;
  }
  if (!cx_->is_subcell(small, big))
    throw NotASubcell(cx_->cell(small).id + " is not a subcell of " +
                      cx_->cell(big).id);
  const auto& bb = basis(big, k);
  MatQ out(space_dim(small, k), space_dim(big, k));
  for (size_t j = 0; j < bb.size(); ++j) {
    CellForm tr = bb[j].restricted(cx_->cell(small).closure);
    out.col(static_cast<Eigen::Index>(j)) = coords_of(small, k, tr);
  }
  std::lock_guard<std::mutex> lock(cache_->mutex);
  cache_->restriction[{big, small, k}] = out;
  return out;
}

MatQ ElementSystem::cell_d(int ci, int k) const
{
  {
    std::lock_guard<std::mutex> lock(cache_->mutex);
    auto it = cache_->d.find({ci, k});
    if (it != cache_->d.end()) return it->second;
  }
  const auto& b = basis(ci, k);
  MatQ out(space_dim(ci, k + 1), space_dim(ci, k));
  for (size_t j = 0; j < b.size(); ++j) {
    CellForm db = d(b[j]);
    if (space_dim(ci, k + 1) == 0) {
      if (!db.is_zero())
        throw NotInSpace("d leaves the system on " + cx_->cell(ci).id);
    } else {
      out.col(static_cast<Eigen::Index>(j)) = coords_of(ci, k + 1, db);
    }
  }
  std::lock_guard<std::mutex> lock(cache_->mutex);
  cache_->d[{ci, k}] = out;
  return out;
}

MatQ ElementSystem::kernel_coords(int ci, int k) const
{
  {
    std::lock_guard<std::mutex> lock(cache_->mutex);
    auto it = cache_->kernel.find({ci, k});
    if (it != cache_->kernel.end()) return it->second;
  }
  const Cell& cell = cx_->cell(ci);
  Eigen::Index rows = 0;
  for (int bc : cell.boundary) rows += space_dim(bc, k);
  MatQ stackmat(rows, space_dim(ci, k));
  Eigen::Index at = 0;
  for (int bc : cell.boundary) {
    MatQ r = restriction(ci, bc, k);
    if (r.rows() == 0) continue;
    stackmat.middleRows(at, r.rows()) = r;
    at += r.rows();
  }
  MatQ out = (rows == 0) ? MatQ::Identity(space_dim(ci, k), space_dim(ci, k))
                         : nullspace(MatQ(stackmat.topRows(at)));
  std::lock_guard<std::mutex> lock(cache_->mutex);
  cache_->kernel[{ci, k}] = out;
  return out;
}

void ElementSystem::verify_closure() const
{
  for (int ci = 0; ci < cx_->num_cells(); ++ci) {
    const int m = cx_->cell(ci).dim;
    for (int k = 0; k <= m; ++k) {
      if (space_dim(ci, k) == 0) continue;
      cell_d(ci, k);  // throws NotInSpace if d leaves the system
      for (int bc : cx_->cell(ci).boundary) restriction(ci, bc, k);
    }
  }
}

namespace {

// Trimmed basis on a single simplex, as trace-completed families.
std::vector<CellForm> simplex_trimmed(const Complex& cx, int ci, int p, int k)
{
  const Cell& cell = cx.cell(ci);
  int sid = cell.support[0].first;
  const int m = cx.simplex(sid).dim();
  std::vector<CellForm> out;
  if (k > m) return out;
  for (const auto& b : trimmed_basis(p, k, m))
    out.push_back(complete_from_support(cx, ci, {{sid, b}}));
  return out;
}

// Inverse limit of the per-simplex trimmed spaces over the closure of an
// agglomerated cell: piecewise forms with matching traces.
std::vector<CellForm> agglomerated_trimmed(const Complex& cx, int ci, int p,
                                           int k)
{
  const Cell& cell = cx.cell(ci);
  std::map<int, std::vector<PolyForm>> gen;
  std::map<int, Eigen::Index> offset;
  Eigen::Index total = 0;
  for (int s : cell.closure) {
    const int m = cx.simplex(s).dim();
    gen[s] = (k <= m) ? trimmed_basis(p, k, m) : std::vector<PolyForm>{};
    offset[s] = total;
    total += static_cast<Eigen::Index>(gen[s].size());
  }
  std::vector<MatQ> blocks;
  Eigen::Index rows = 0;
  std::set<int> closure_set(cell.closure.begin(), cell.closure.end());
  for (int t : cell.closure)
    for (const auto& [f, c] : cx.simplex_facets(t)) {
      if (!closure_set.count(f)) continue;
      AffineEmbed embed = cx.relative_chart(t, f);
      const int mf = cx.simplex(f).dim();
      std::vector<PolyForm> traces;
      std::vector<PolyForm> all = gen[f];
      for (const auto& g : gen[t]) {
        PolyForm tr = (k <= mf) ? pullback(embed, g) : zero_form(mf, mf);
        if (tr.degree() != k) tr = zero_form(mf, std::min(mf, k));
        traces.push_back(tr);
        all.push_back(traces.back());
      }
      auto keys = collect_keys(all);
      MatQ block = MatQ::Zero(static_cast<Eigen::Index>(keys.size()), total);
      if (!traces.empty())
        block.middleCols(offset[t], static_cast<Eigen::Index>(gen[t].size())) =
            coeff_matrix(traces, keys);
      if (!gen[f].empty())
        block.middleCols(offset[f], static_cast<Eigen::Index>(gen[f].size())) =
            -coeff_matrix(gen[f], keys);
      rows += block.rows();
      blocks.push_back(std::move(block));
    }
  MatQ constraints(rows, total);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    constraints.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  MatQ ker = (rows == 0) ? MatQ::Identity(total, total) : nullspace(constraints);
  std::vector<CellForm> out;
  for (Eigen::Index j = 0; j < ker.cols(); ++j) {
    CellForm fam(k);
    for (int s : cell.closure) {
      const int m = cx.simplex(s).dim();
      PolyForm acc = zero_form(m, std::min(m, k));
      for (size_t g = 0; g < gen[s].size(); ++g) {
        const Rational& c = ker(offset[s] + static_cast<Eigen::Index>(g), j);
        if (c != 0) acc += c * gen[s][g];
      }
      fam.set_part(s, acc);
    }
    out.push_back(std::move(fam));
  }
  return out;
}

std::vector<CellForm> plain_trimmed_cell(const Complex& cx, int ci, int p,
                                         int k)
{
  if (cx.cell(ci).support.size() == 1) return simplex_trimmed(cx, ci, p, k);
  return agglomerated_trimmed(cx, ci, p, k);
}

}  // namespace

ElementSystem trimmed_system(const Complex& cx, int p)
{
  MeshOrders orders;
  orders.default_order = p;
  return trimmed_system(cx, orders);
}

ElementSystem trimmed_system(const Complex& cx, const MeshOrders& orders)
{
  ElementSystem sys(cx);
  std::vector<int> order_of(static_cast<size_t>(cx.num_cells()));
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    order_of[static_cast<size_t>(ci)] = orders.order_of(cx.cell(ci).id);
    if (order_of[static_cast<size_t>(ci)] < 1)
      throw OrderNotMonotone("trimmed order must be >= 1 on cell " +
                             cx.cell(ci).id);
  }
  for (int ci = 0; ci < cx.num_cells(); ++ci)
    for (int w : cx.subcells(ci))
      if (order_of[static_cast<size_t>(w)] > order_of[static_cast<size_t>(ci)])
        throw OrderNotMonotone("order increases into subcell " + cx.cell(w).id +
                               " of " + cx.cell(ci).id);

  // Does the subcell cone of ci carry any lower order?
  auto cone_has_lower = [&](int ci) {
    for (int w : cx.subcells(ci))
      if (order_of[static_cast<size_t>(w)] < order_of[static_cast<size_t>(ci)])
        return true;
    return false;
  };

  for (int m = 0; m <= cx.dim(); ++m) {
    for (int ci : cx.cells_of_dim(m)) {
      const int p = order_of[static_cast<size_t>(ci)];
      for (int k = 0; k <= m; ++k) {
        std::vector<CellForm> big = plain_trimmed_cell(cx, ci, p, k);
        if (!cone_has_lower(ci)) {
          sys.set_basis(ci, k, std::move(big));
          continue;
        }
        // Variable order: keep the forms whose boundary traces lie
        // in the already-built lower-order subcell spaces.
        std::vector<MatQ> rowblocks;
        Eigen::Index rows = 0;
        for (int bc : cx.cell(ci).boundary) {
          const auto& target = sys.basis(bc, k);
          std::vector<CellForm> traces;
          for (const auto& u : big)
            traces.push_back(u.restricted(cx.cell(bc).closure));
          std::vector<const CellForm*> ptrs = pointers(target);
          for (const auto& t : traces) ptrs.push_back(&t);
          Stacked st = make_stacked(cx.cell(bc).closure, ptrs);
          MatQ tm = stack_all(st, traces);
          MatQ bm = stack_all(st, target);
          MatQ ann = nullspace(MatQ(bm.transpose()));
          if (ann.cols() == 0) continue;
          MatQ block = ann.transpose() * tm;
          rows += block.rows();
          rowblocks.push_back(std::move(block));
        }
        if (rows == 0) {
          sys.set_basis(ci, k, std::move(big));
          continue;
        }
        MatQ constraints(rows, static_cast<Eigen::Index>(big.size()));
        Eigen::Index at = 0;
        for (const auto& b : rowblocks) {
          constraints.middleRows(at, b.rows()) = b;
          at += b.rows();
        }
        MatQ ker = nullspace(constraints);
        std::vector<CellForm> kept;
        for (Eigen::Index j = 0; j < ker.cols(); ++j) {
          CellForm fam(k);
          bool first = true;
          for (Eigen::Index i = 0; i < ker.rows(); ++i) {
            if (ker(i, j) == 0) continue;
            CellForm scaled = big[static_cast<size_t>(i)];
            scaled *= ker(i, j);
            if (first) {
              fam = std::move(scaled);
              first = false;
            } else {
              fam += scaled;
            }
          }
          if (first) {
            fam = CellForm(k);
            for (int s : cx.cell(ci).closure) {
              const int mm = cx.simplex(s).dim();
              fam.set_part(s, zero_form(mm, std::min(mm, k)));
            }
          }
          kept.push_back(std::move(fam));
        }
        sys.set_basis(ci, k, std::move(kept));
      }
    }
  }
  sys.verify_closure();
  return sys;
}

ElementSystem polynomial_system(const Complex& cx,
                                const std::function<int(int, int)>& pi)
{
  if (!cx.is_pure_simplicial())
    throw NotSimplicial("polynomial_system needs flat simplicial cells");
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    const int m = cx.cell(ci).dim;
    for (int k = 0; k < m; ++k)
      if (pi(ci, k + 1) < pi(ci, k) - 1)
        throw ConditionViolated("pi(T, k+1) >= pi(T, k) - 1 fails on " +
                                cx.cell(ci).id);
    for (int w : cx.subcells(ci))
      for (int k = 0; k <= cx.cell(w).dim; ++k)
        if (w != ci && pi(w, k) < pi(ci, k))
          throw ConditionViolated("pi must not decrease on subcell " +
                                  cx.cell(w).id);
  }
  ElementSystem sys(cx);
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    const Cell& cell = cx.cell(ci);
    int sid = cell.support[0].first;
    const int m = cx.simplex(sid).dim();
    for (int k = 0; k <= m; ++k) {
      std::vector<CellForm> basis;
      for (const auto& b : full_poly_basis(pi(ci, k), k, m))
        basis.push_back(complete_from_support(cx, ci, {{sid, b}}));
      sys.set_basis(ci, k, std::move(basis));
    }
  }
  sys.verify_closure();
  return sys;
}

CellForm GlobalSpace::family_on(const ElementSystem& sys, Eigen::Index f,
                                int ci) const
{
  auto it = families[static_cast<size_t>(f)].find(ci);
  if (it == families[static_cast<size_t>(f)].end())
    return sys.from_coords(ci, degree, VecQ::Zero(sys.space_dim(ci, degree)));
  return sys.from_coords(ci, degree, it->second);
}

GlobalSpace global_space(const ElementSystem& sys, std::vector<int> view,
                         int k)
{
  const Complex& cx = sys.complex();
  std::sort(view.begin(), view.end(), [&](int a, int b) {
    if (cx.cell(a).dim != cx.cell(b).dim) return cx.cell(a).dim < cx.cell(b).dim;
    return a < b;
  });
  std::set<int> in_view(view.begin(), view.end());
  for (int ci : view)
    for (int w : cx.subcells(ci))
      if (!in_view.count(w))
        throw NotASubcell("global_space: view is not subcell-closed");

  std::map<int, Eigen::Index> offset;
  Eigen::Index total = 0;
  for (int ci : view) {
    offset[ci] = total;
    total += sys.space_dim(ci, k);
  }
  Eigen::Index rows = 0;
  for (int ci : view)
    for (int bc : cx.cell(ci).boundary) rows += sys.space_dim(bc, k);
  MatQ constraints = MatQ::Zero(rows, total);
  Eigen::Index at = 0;
  for (int ci : view)
    for (int bc : cx.cell(ci).boundary) {
      MatQ r = sys.restriction(ci, bc, k);
      if (r.rows() == 0) continue;
      constraints.middleRows(at, r.rows()).middleCols(offset[ci], r.cols()) = r;
      for (Eigen::Index i = 0; i < r.rows(); ++i)
        constraints(at + i, offset[bc] + i) = -1;
      at += r.rows();
    }
  MatQ ker = (at == 0) ? MatQ::Identity(total, total)
                       : nullspace(MatQ(constraints.topRows(at)));
  GlobalSpace gs;
  gs.degree = k;
  gs.cells = view;
  for (Eigen::Index j = 0; j < ker.cols(); ++j) {
    std::map<int, VecQ> fam;
    for (int ci : view) {
      VecQ coords = ker.block(offset[ci], j, sys.space_dim(ci, k), 1);
      bool nonzero = false;
      for (Eigen::Index i = 0; i < coords.size(); ++i)
        if (coords(i) != 0) nonzero = true;
      if (nonzero) fam[ci] = coords;
    }
    gs.families.push_back(std::move(fam));
    gs.labels.push_back("g" + std::to_string(j));
  }
  return gs;
}

VecQ global_coords_of(const ElementSystem& sys, const GlobalSpace& gs,
                      const std::map<int, VecQ>& family)
{
  std::map<int, Eigen::Index> offset;
  Eigen::Index total = 0;
  for (int ci : gs.cells) {
    offset[ci] = total;
    total += sys.space_dim(ci, gs.degree);
  }
  MatQ basis = MatQ::Zero(total, gs.dim());
  for (Eigen::Index j = 0; j < gs.dim(); ++j)
    for (const auto& [ci, coords] : gs.families[static_cast<size_t>(j)])
      basis.block(offset.at(ci), j, coords.size(), 1) = coords;
  VecQ rhs = VecQ::Zero(total);
  for (const auto& [ci, coords] : family) {
    auto it = offset.find(ci);
    if (it == offset.end()) throw NotASubcell("family leaves the subcomplex");
    rhs.segment(it->second, coords.size()) = coords;
  }
  try {
    return solve(basis, rhs, true);
  } catch (const InconsistentSystem&) {
    throw NotInSpace("family is not in the global space");
  }
}

MatQ global_d_matrix(const ElementSystem& sys, const GlobalSpace& from,
                     const GlobalSpace& to)
{
  MatQ out(to.dim(), from.dim());
  for (Eigen::Index j = 0; j < from.dim(); ++j) {
    std::map<int, VecQ> image;
    for (const auto& [ci, coords] : from.families[static_cast<size_t>(j)]) {
      VecQ dc = sys.cell_d(ci, from.degree) * coords;
      if (dc.size() > 0) image[ci] = dc;
    }
    out.col(j) = global_coords_of(sys, to, image);
  }
  return out;
}

MatQ de_rham_matrix(const ElementSystem& sys, const GlobalSpace& gs)
{
  const Complex& cx = sys.complex();
  std::vector<int> kcells;
  for (int ci : gs.cells)
    if (cx.cell(ci).dim == gs.degree) kcells.push_back(ci);
  MatQ out = MatQ::Zero(static_cast<Eigen::Index>(kcells.size()), gs.dim());
  for (Eigen::Index j = 0; j < gs.dim(); ++j)
    for (size_t r = 0; r < kcells.size(); ++r) {
      auto it = gs.families[static_cast<size_t>(j)].find(kcells[r]);
      if (it == gs.families[static_cast<size_t>(j)].end()) continue;
      CellForm u = sys.from_coords(kcells[r], gs.degree, it->second);
      out(static_cast<Eigen::Index>(r), j) = integrate_cell(cx, kcells[r], u);
    }
  return out;
}

Cochain de_rham_cochain(const ElementSystem& sys, const GlobalSpace& gs,
                        const VecQ& coords)
{
  const Complex& cx = sys.complex();
  MatQ rho = de_rham_matrix(sys, gs);
  VecQ vals = rho * coords;
  Cochain out;
  out.degree = gs.degree;
  Eigen::Index r = 0;
  for (int ci : gs.cells)
    if (cx.cell(ci).dim == gs.degree) out.values[cx.cell(ci).id] = vals(r++);
  return out;
}

bool check_extension(const ElementSystem& sys, int ci, int k)
{
  const Complex& cx = sys.complex();
  if (cx.cell(ci).dim == 0) return true;  // vacuous
  std::vector<int> view = cx.boundary_complex_cells(ci);
  GlobalSpace gs = global_space(sys, view, k);
  if (gs.dim() == 0) return true;
  MatQ images(gs.dim(), sys.space_dim(ci, k));
  for (Eigen::Index j = 0; j < sys.space_dim(ci, k); ++j) {
    std::map<int, VecQ> fam;
    for (int w : view) {
      MatQ r = sys.restriction(ci, w, k);
      if (r.rows() == 0) continue;
      fam[w] = VecQ(r.col(j));
    }
    images.col(j) = global_coords_of(sys, gs, fam);
  }
  return rank(images) == gs.dim();
}

bool check_exactness_interior(const ElementSystem& sys, int ci)
{
  const Complex& cx = sys.complex();
  const int m = cx.cell(ci).dim;
  if (!sys.has_constants(ci)) return false;
  if (m == 0) return sys.space_dim(ci, 0) == 1;
  MatQ d0 = sys.cell_d(ci, 0);
  if (d0.cols() - rank(d0) != 1) return false;  // ker d0 = constants
  for (int k = 1; k < m; ++k) {
    MatQ dk = sys.cell_d(ci, k);
    MatQ dkm = sys.cell_d(ci, k - 1);
    if (dk.cols() - rank(dk) != rank(dkm)) return false;
  }
  MatQ dtop = sys.cell_d(ci, m - 1);
  return rank(dtop) == sys.space_dim(ci, m);
}

bool check_exactness_boundary(const ElementSystem& sys, int ci)
{
  const Complex& cx = sys.complex();
  const int m = cx.cell(ci).dim;
  if (m == 0) {
    if (sys.space_dim(ci, 0) != 1) return false;
    return integrate_cell(cx, ci, sys.basis(ci, 0)[0]) != 0;
  }
  std::vector<MatQ> ker(static_cast<size_t>(m) + 1);
  for (int k = 0; k <= m; ++k)
    ker[static_cast<size_t>(k)] = sys.kernel_coords(ci, k);
  {
    MatQ d0 = sys.cell_d(ci, 0) * ker[0];
    if (rank(d0) != d0.cols()) return false;  // injective on A_0^0
  }
  for (int k = 1; k < m; ++k) {
    MatQ dk = sys.cell_d(ci, k) * ker[static_cast<size_t>(k)];
    MatQ dkm = sys.cell_d(ci, k - 1) * ker[static_cast<size_t>(k - 1)];
    if (dk.cols() - rank(dk) != rank(dkm)) return false;
  }
  RowVecQ integral(sys.space_dim(ci, m));
  for (Eigen::Index j = 0; j < sys.space_dim(ci, m); ++j)
    integral(j) =
        integrate_cell(cx, ci, sys.basis(ci, m)[static_cast<size_t>(j)]);
  bool onto = false;
  for (Eigen::Index j = 0; j < integral.size(); ++j)
    if (integral(j) != 0) onto = true;
  if (!onto) return false;
  Eigen::Index ker_int = sys.space_dim(ci, m) - 1;
  MatQ dtop = sys.cell_d(ci, m - 1) * ker[static_cast<size_t>(m - 1)];
  return rank(dtop) == ker_int;
}

CompatibilityReport compatibility(const ElementSystem& sys, int threads)
{
  const Complex& cx = sys.complex();
  CompatibilityReport report;
  const int n = cx.num_cells();
  std::vector<std::vector<CellVerdict>> per_cell(static_cast<size_t>(n));

  auto work = [&](int begin, int end) {
    for (int ci = begin; ci < end; ++ci) {
      const int m = cx.cell(ci).dim;
      bool interior = check_exactness_interior(sys, ci);
      bool boundary_exact = check_exactness_boundary(sys, ci);
      for (int k = 0; k <= m; ++k) {
        CellVerdict v;
        v.cell = cx.cell(ci).id;
        v.k = k;
        v.extensions = check_extension(sys, ci, k);
        v.exact_interior = interior;
        v.exact_boundary = boundary_exact;
        per_cell[static_cast<size_t>(ci)].push_back(v);
      }
    }
  };
  if (threads <= 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      int begin = t * chunk, end = std::min(n, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  report.admits_extensions = true;
  report.locally_exact = true;
  for (int ci = 0; ci < n; ++ci)
    for (const auto& v : per_cell[static_cast<size_t>(ci)]) {
      if (!v.extensions) {
        report.admits_extensions = false;
        if (report.first_failure.empty())
          report.first_failure =
              "extensions fail on " + v.cell + " at k=" + std::to_string(v.k);
      }
      if (!v.exact_interior) {
        report.locally_exact = false;
        if (report.first_failure.empty())
          report.first_failure = "local exactness fails on " + v.cell;
      }
      report.verdicts.push_back(v);
    }

  for (int ci = 0; ci < n; ++ci) {
    const int m = cx.cell(ci).dim;
    for (int k = 0; k <= m; ++k)
      report.dims.push_back({cx.cell(ci).id, k, sys.space_dim(ci, k),
                             sys.kernel_coords(ci, k).cols()});
  }
  report.kernel_count_equality = true;
  for (int k = 0; k <= cx.dim(); ++k) {
    GlobalSpace gs = global_space(sys, cx.all_cells(), k);
    report.global_dims[k] = gs.dim();
    Eigen::Index sum = 0;
    for (int ci = 0; ci < n; ++ci)
      if (k <= cx.cell(ci).dim) sum += sys.kernel_coords(ci, k).cols();
    if (gs.dim() > sum)
      throw NotCompatible("kernel dimension count violated at k=" +
                          std::to_string(k));
    if (report.admits_extensions && gs.dim() != sum) {
      report.kernel_count_equality = false;
      if (report.first_failure.empty())
        report.first_failure =
            "kernel dimension equality fails at k=" + std::to_string(k);
    }
  }
  report.compatible = report.admits_extensions && report.locally_exact &&
                      report.kernel_count_equality;
  return report;
}

std::string CompatibilityReport::to_json() const
{
  nlohmann::ordered_json j;
  j["compatible"] = compatible;
  j["admits_extensions"] = admits_extensions;
  j["locally_exact"] = locally_exact;
  j["kernel_count_equality"] = kernel_count_equality;
  if (!first_failure.empty()) j["first_failure"] = first_failure;
  nlohmann::ordered_json verdict_rows = nlohmann::ordered_json::array();
  for (const auto& v : verdicts) {
    nlohmann::ordered_json row;
    row["cell"] = v.cell;
    row["k"] = v.k;
    row["extensions"] = v.extensions;
    row["exact"] = v.exact_interior;
    row["exact_bc"] = v.exact_boundary;
    verdict_rows.push_back(std::move(row));
  }
  j["cells"] = std::move(verdict_rows);
  nlohmann::ordered_json dim_rows = nlohmann::ordered_json::array();
  for (const auto& [cell, k, dima, dima0] : dims) {
    nlohmann::ordered_json row;
    row["cell"] = cell;
    row["k"] = k;
    row["dim"] = static_cast<long>(dima);
    row["dim0"] = static_cast<long>(dima0);
    dim_rows.push_back(std::move(row));
  }
  j["dimensions"] = std::move(dim_rows);
  nlohmann::ordered_json gd;
  for (const auto& [k, dim] : global_dims)
    gd[std::to_string(k)] = static_cast<long>(dim);
  j["global_dims"] = std::move(gd);
  return j.dump(2) + "\n";
}

CohomologyReport discrete_cohomology_check(const ElementSystem& sys)
{
  const Complex& cx = sys.complex();
  CohomologyReport report;
  report.cochain_betti = cx.betti_numbers();

  const int d = cx.dim();
  std::vector<GlobalSpace> spaces;
  for (int k = 0; k <= d; ++k)
    spaces.push_back(global_space(sys, cx.all_cells(), k));
  std::vector<MatQ> dmats;
  for (int k = 0; k < d; ++k)
    dmats.push_back(global_d_matrix(sys, spaces[static_cast<size_t>(k)],
                                    spaces[static_cast<size_t>(k + 1)]));
  report.system_betti.resize(static_cast<size_t>(d) + 1);
  for (int k = 0; k <= d; ++k) {
    Eigen::Index nk = spaces[static_cast<size_t>(k)].dim();
    Eigen::Index rk = (k < d) ? rank(dmats[static_cast<size_t>(k)]) : 0;
    Eigen::Index rkm = (k > 0) ? rank(dmats[static_cast<size_t>(k - 1)]) : 0;
    report.system_betti[static_cast<size_t>(k)] =
        static_cast<int>(nk - rk - rkm);
  }
  if (report.system_betti != report.cochain_betti) {
    report.isomorphic = false;
    report.detail = "Betti numbers differ";
    return report;
  }
  report.isomorphic = true;
  for (int k = 0; k <= d; ++k) {
    const Eigen::Index nk = spaces[static_cast<size_t>(k)].dim();
    MatQ rho = de_rham_matrix(sys, spaces[static_cast<size_t>(k)]);
    MatQ kerd = (k < d) ? nullspace(dmats[static_cast<size_t>(k)])
                        : MatQ(MatQ::Identity(nk, nk));
    const Eigen::Index ncells =
        static_cast<Eigen::Index>(cx.cells_of_dim(k).size());
    MatQ delta_km =
        (k > 0) ? cx.coboundary_matrix(k - 1) : MatQ::Zero(ncells, 0);
    MatQ dm_km = (k > 0) ? dmats[static_cast<size_t>(k - 1)]
                         : MatQ::Zero(nk, 0);
    MatQ rho_ker = rho * kerd;
    MatQ joint(rho.rows(), rho_ker.cols() + delta_km.cols());
    joint.leftCols(rho_ker.cols()) = rho_ker;
    joint.rightCols(delta_km.cols()) = delta_km;
    Eigen::Index r_joint = rank(joint);
    MatQ delta_k = (k < d) ? cx.coboundary_matrix(k) : MatQ::Zero(0, ncells);
    Eigen::Index dim_ker_delta = ncells - rank(delta_k);
    bool onto = r_joint == dim_ker_delta;
    Eigen::Index preimage_dim = rho_ker.cols() - r_joint + rank(delta_km);
    bool injective = preimage_dim == rank(dm_km);
    if (!onto || !injective) {
      report.isomorphic = false;
      report.detail = "induced map fails at k=" + std::to_string(k);
      return report;
    }
  }
  return report;
}

MatQ gram_std(const std::vector<PolyForm>& basis, const MatQ& ginv,
              const Rational& density)
{
  const Eigen::Index n = static_cast<Eigen::Index>(basis.size());
  MatQ out(n, n);
  if (n == 0) return out;
  const int m = basis[0].dim();
  PolyForm vol = (m == 0)
                     ? constant_form(0, 0, Rational(1))
                     : constant_form(m, (AltMask(1) << m) - 1u, Rational(1));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      PolyForm f = pointwise_inner(basis[static_cast<size_t>(i)],
                                   basis[static_cast<size_t>(j)], ginv);
      Rational v = density * integrate_std(m == 0 ? f : wedge(f, vol));
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

}  // namespace fes
