#include "fes/mirror.hpp"

#include <algorithm>
#include <json.hpp>
#include <set>

namespace fes {

void MirrorSystem::add(int ci, int k, MirrorFunctional l)
{
  l.cell = ci;
  l.degree = k;
  mirrors_[{ci, k}].push_back(std::move(l));
}

const std::vector<MirrorFunctional>& MirrorSystem::mirrors(int ci, int k) const
{
  static const std::vector<MirrorFunctional> empty;
  auto it = mirrors_.find({ci, k});
  return it == mirrors_.end() ? empty : it->second;
}

Rational MirrorSystem::evaluate(const Complex& cx, const MirrorFunctional& l,
                                const CellForm& u) const
{
  switch (l.kind) {
    case MirrorFunctional::Kind::Wedge: {
      Rational total(0);
      for (const auto& [s, sgn] : cx.cell(l.cell).support) {
        auto it = l.wedge_weight.find(s);
        if (it == l.wedge_weight.end())
          throw NotInSpace("wedge mirror missing weight on simplex");
        total += Rational(sgn) * integrate_std(wedge(it->second, u.part(s)));
      }
      return total;
    }
    case MirrorFunctional::Kind::Product:
      if (!products_ || !products_->exact())
        throw QuadratureFailure("product mirror needs exact products");
      return products_->pair(cx, l.cell, u, l.product_arg);
    case MirrorFunctional::Kind::ProductD:
      if (!products_ || !products_->exact())
        throw QuadratureFailure("product mirror needs exact products");
      return products_->pair(cx, l.cell, d(u), l.product_arg);
    case MirrorFunctional::Kind::Integral:
      return integrate_cell(cx, l.cell, u);
    case MirrorFunctional::Kind::Covector: {
      if (!host_) throw HostSpaceTooSmall("covector mirror without a host");
      VecQ coords = host_->coords_of(l.cell, l.degree, u);
      Rational total(0);
      for (Eigen::Index i = 0; i < coords.size(); ++i)
        total += l.covector(i) * coords(i);
      return total;
    }
  }
  throw std::logic_error("unreachable mirror kind");
}

MirrorSystem canonical_trimmed_mirrors(const Complex& cx, int p)
{
  if (!cx.is_pure_simplicial())
    throw NotSimplicial("canonical trimmed mirrors need a simplicial complex");
  if (p < 1) throw std::invalid_argument("canonical mirrors need p >= 1");
  MirrorSystem out;
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    const int m = cx.cell(ci).dim;
    int sid = cx.cell(ci).support[0].first;
    for (int k = 0; k <= m; ++k) {
      const int wdeg = p - m + k - 1;
      if (wdeg < 0) continue;
      for (const auto& w : full_poly_basis(wdeg, m - k, m)) {
        MirrorFunctional l;
        l.kind = MirrorFunctional::Kind::Wedge;
        l.wedge_weight[sid] = w;
        out.add(ci, k, std::move(l));
      }
    }
  }
  return out;
}

MirrorSystem l2_projection_mirrors(const ElementSystem& sys,
                                   const CellProducts& a)
{
  const Complex& cx = sys.complex();
  MirrorSystem out;
  out.set_products(&a);
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    const int m = cx.cell(ci).dim;
    for (int k = 0; k <= m; ++k) {
      MatQ ker = sys.kernel_coords(ci, k);
      for (Eigen::Index j = 0; j < ker.cols(); ++j) {
        MirrorFunctional l;
        l.kind = MirrorFunctional::Kind::Product;
        l.product_arg = sys.from_coords(ci, k, VecQ(ker.col(j)));
        out.add(ci, k, std::move(l));
      }
    }
  }
  return out;
}

MirrorSystem harmonic_mirrors(const ElementSystem& sys, const CellProducts& a)
{
  if (!a.exact())
    throw QuadratureFailure("harmonic mirrors need exact products");
  const Complex& cx = sys.complex();
  MirrorSystem out;
  out.set_products(&a);
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    const int m = cx.cell(ci).dim;
    for (int k = 0; k <= m; ++k) {
      // span of d A_0^{k-1}(T), reduced to an independent set
      if (k >= 1 && sys.space_dim(ci, k - 1) > 0) {
        MatQ img = sys.cell_d(ci, k - 1) * sys.kernel_coords(ci, k - 1);
        for (auto j : independent_columns(img)) {
          MirrorFunctional l;
          l.kind = MirrorFunctional::Kind::Product;
          l.product_arg = sys.from_coords(ci, k, VecQ(img.col(j)));
          out.add(ci, k, std::move(l));
        }
      }
      if (k == m) {
        MirrorFunctional l;
        l.kind = MirrorFunctional::Kind::Integral;
        out.add(ci, k, std::move(l));
      } else if (sys.space_dim(ci, k) > 0) {
        MatQ img = sys.cell_d(ci, k) * sys.kernel_coords(ci, k);
        for (auto j : independent_columns(img)) {
          MirrorFunctional l;
          l.kind = MirrorFunctional::Kind::ProductD;
          l.product_arg = sys.from_coords(ci, k + 1, VecQ(img.col(j)));
          out.add(ci, k, std::move(l));
        }
      }
    }
  }
  return out;
}

MatQ pairing_matrix(const MirrorSystem& mirrors, const ElementSystem& sys,
                    int ci, int k)
{
  const Complex& cx = sys.complex();
  const auto& ls = mirrors.mirrors(ci, k);
  MatQ ker = sys.kernel_coords(ci, k);
  MatQ out(static_cast<Eigen::Index>(ls.size()), ker.cols());
  for (Eigen::Index j = 0; j < ker.cols(); ++j) {
    CellForm b = sys.from_coords(ci, k, VecQ(ker.col(j)));
    for (size_t i = 0; i < ls.size(); ++i)
      out(static_cast<Eigen::Index>(i), j) = mirrors.evaluate(cx, ls[i], b);
  }
  return out;
}

bool faithfulness_check(const MirrorSystem& mirrors, const ElementSystem& sys)
{
  const Complex& cx = sys.complex();
  for (int ci = 0; ci < cx.num_cells(); ++ci)
    for (int k = 0; k <= cx.cell(ci).dim; ++k)
      if (!check_extension(sys, ci, k))
        throw ExtensionsUnverified("system lacks extensions on " +
                                   cx.cell(ci).id);
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    for (int k = 0; k <= cx.cell(ci).dim; ++k) {
      MatQ pairing = pairing_matrix(mirrors, sys, ci, k);
      if (pairing.rows() != pairing.cols()) return false;
      if (pairing.rows() == 0) continue;
      if (determinant(pairing) == 0) return false;
    }
  }
  // global mirror-image isomorphism spot check on three subcomplexes
  std::vector<std::vector<int>> views;
  views.push_back(cx.skeleton_cells(0));
  if (cx.dim() >= 1) views.push_back(cx.skeleton_cells(cx.dim() - 1));
  if (!cx.cells_of_dim(cx.dim()).empty()) {
    int top = cx.cells_of_dim(cx.dim()).back();
    if (cx.cell(top).dim >= 1)
      views.push_back(cx.closure_of_cells(cx.boundary_complex_cells(top)));
  }
  for (const auto& view : views) {
    for (int k = 0; k <= cx.dim(); ++k) {
      GlobalSpace gs = global_space(sys, view, k);
      Eigen::Index nmirrors = 0;
      for (int ci : view) nmirrors += static_cast<Eigen::Index>(
          mirrors.mirrors(ci, k).size());
      if (nmirrors != gs.dim()) return false;
      MatQ phi(nmirrors, gs.dim());
      Eigen::Index row = 0;
      for (int ci : view)
        for (const auto& l : mirrors.mirrors(ci, k)) {
          for (Eigen::Index j = 0; j < gs.dim(); ++j)
            phi(row, j) = mirrors.evaluate(cx, l, gs.family_on(sys, j, ci));
          ++row;
        }
      if (gs.dim() > 0 && rank(phi) != gs.dim()) return false;
    }
  }
  return true;
}

std::map<int, VecQ> interpolate_values(
    const MirrorSystem& mirrors, const ElementSystem& sys, int k,
    const std::function<Rational(int ci, size_t idx)>& value)
{
  const Complex& cx = sys.complex();
  std::map<int, VecQ> solution;
  for (int m = 0; m <= cx.dim(); ++m) {
    for (int ci : cx.cells_of_dim(m)) {
      if (k > m || sys.space_dim(ci, k) == 0) continue;
      const auto& ls = mirrors.mirrors(ci, k);
      // Gather boundary conditions and own mirror values.
      Eigen::Index rows = 0;
      std::vector<MatQ> blocks;
      std::vector<VecQ> rhss;
      bool all_zero = true;
      for (int bc : cx.cell(ci).boundary) {
        MatQ r = sys.restriction(ci, bc, k);
        if (r.rows() == 0) continue;
        auto it = solution.find(bc);
        VecQ rhs =
            (it != solution.end()) ? it->second : VecQ(VecQ::Zero(r.rows()));
        for (Eigen::Index i = 0; i < rhs.size(); ++i)
          if (rhs(i) != 0) all_zero = false;
        rows += r.rows();
        blocks.push_back(std::move(r));
        rhss.push_back(std::move(rhs));
      }
      VecQ own_vals(static_cast<Eigen::Index>(ls.size()));
      for (size_t i = 0; i < ls.size(); ++i) {
        own_vals(static_cast<Eigen::Index>(i)) = value(ci, i);
        if (own_vals(static_cast<Eigen::Index>(i)) != 0) all_zero = false;
      }
      if (all_zero) continue;  // family vanishes here
      MatQ lmat(static_cast<Eigen::Index>(ls.size()), sys.space_dim(ci, k));
      for (size_t i = 0; i < ls.size(); ++i)
        for (Eigen::Index j = 0; j < sys.space_dim(ci, k); ++j)
          lmat(static_cast<Eigen::Index>(i), j) =
              mirrors.evaluate(cx, ls[i], sys.basis(ci, k)[static_cast<size_t>(j)]);
      MatQ mat(rows + lmat.rows(), sys.space_dim(ci, k));
      VecQ rhs(rows + lmat.rows());
      Eigen::Index at = 0;
      for (size_t i = 0; i < blocks.size(); ++i) {
        mat.middleRows(at, blocks[i].rows()) = blocks[i];
        rhs.segment(at, rhss[i].size()) = rhss[i];
        at += blocks[i].rows();
      }
      mat.middleRows(at, lmat.rows()) = lmat;
      rhs.segment(at, own_vals.size()) = own_vals;
      VecQ x;
      try {
        x = solve(mat, rhs, true);
      } catch (const InconsistentSystem&) {
        throw InconsistentInput("interpolation data inconsistent on " +
                                cx.cell(ci).id);
      } catch (const SingularMatrix&) {
        throw NotFaithful("interpolation not unisolvent on " + cx.cell(ci).id);
      }
      bool nonzero = false;
      for (Eigen::Index i = 0; i < x.size(); ++i)
        if (x(i) != 0) nonzero = true;
      if (nonzero) solution[ci] = std::move(x);
    }
  }
  return solution;
}

std::map<int, VecQ> interpolate(const MirrorSystem& mirrors,
                                const ElementSystem& sys,
                                const std::map<int, CellForm>& u, int k)
{
  const Complex& cx = sys.complex();
  // Restriction consistency of the input across covering pairs.
  for (const auto& [ci, form] : u)
    for (int bc : cx.cell(ci).boundary) {
      auto it = u.find(bc);
      if (it == u.end()) continue;
      CellForm tr = form.restricted(cx.cell(bc).closure);
      for (const auto& [s, f] : tr.parts())
        if (!(f == it->second.part(s)))
          throw InconsistentInput("input family has mismatched traces at " +
                                  cx.cell(bc).id);
    }
  auto value = [&](int ci, size_t idx) -> Rational {
    auto it = u.find(ci);
    if (it == u.end())
      throw InconsistentInput("input family missing cell " + cx.cell(ci).id);
    return mirrors.evaluate(cx, mirrors.mirrors(ci, k)[idx], it->second);
  };
  return interpolate_values(mirrors, sys, k, value);
}

GlobalSpace dof_dual_global_space(const MirrorSystem& mirrors,
                                  const ElementSystem& sys, int k)
{
  const Complex& cx = sys.complex();
  GlobalSpace gs;
  gs.degree = k;
  gs.cells = cx.all_cells();
  std::sort(gs.cells.begin(), gs.cells.end(), [&](int a, int b) {
    if (cx.cell(a).dim != cx.cell(b).dim) return cx.cell(a).dim < cx.cell(b).dim;
    return a < b;
  });
  for (int ci : gs.cells) {
    const auto& ls = mirrors.mirrors(ci, k);
    for (size_t i = 0; i < ls.size(); ++i) {
      auto indicator = [&](int cj, size_t idx) -> Rational {
        return (cj == ci && idx == i) ? Rational(1) : Rational(0);
      };
      gs.families.push_back(interpolate_values(mirrors, sys, k, indicator));
      gs.labels.push_back(cx.cell(ci).id + "#" + std::to_string(i));
    }
  }
  return gs;
}

bool commutation_check(const MirrorSystem& mirrors, const ElementSystem& host)
{
  const Complex& cx = host.complex();
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    const int m = cx.cell(ci).dim;
    for (int k = 1; k <= m; ++k) {
      const auto& ls = mirrors.mirrors(ci, k);
      if (ls.empty()) continue;
      const auto& hb = host.basis(ci, k - 1);
      if (hb.empty()) continue;
      const Eigen::Index cols = static_cast<Eigen::Index>(hb.size());
      // span rows: subcell mirrors of degree k-1 evaluated on traces
      std::vector<RowVecQ> span_rows;
      for (int w : cx.subcells(ci)) {
        for (const auto& l : mirrors.mirrors(w, k - 1)) {
          RowVecQ row(cols);
          for (Eigen::Index j = 0; j < cols; ++j)
            row(j) = mirrors.evaluate(
                cx, l, hb[static_cast<size_t>(j)].restricted(
                           cx.cell(w).closure));
          span_rows.push_back(std::move(row));
        }
      }
      MatQ span(static_cast<Eigen::Index>(span_rows.size()), cols);
      for (size_t i = 0; i < span_rows.size(); ++i)
        span.row(static_cast<Eigen::Index>(i)) = span_rows[i];
      Eigen::Index base_rank = rank(span);
      for (const auto& l : ls) {
        RowVecQ row(cols);
        for (Eigen::Index j = 0; j < cols; ++j)
          row(j) = mirrors.evaluate(cx, l, d(hb[static_cast<size_t>(j)]));
        MatQ stacked(span.rows() + 1, cols);
        stacked.topRows(span.rows()) = span;
        stacked.row(span.rows()) = row;
        if (rank(stacked) != base_rank) return false;  // l.d escapes the span
      }
    }
  }
  return true;
}

VecQ extension_from_mirrors(const MirrorSystem& mirrors,
                            const ElementSystem& sys, int ci, int k,
                            const std::map<int, VecQ>& boundary)
{
  const Complex& cx = sys.complex();
  std::vector<MatQ> blocks;
  std::vector<VecQ> rhss;
  Eigen::Index rows = 0;
  for (int bc : cx.cell(ci).boundary) {
    MatQ r = sys.restriction(ci, bc, k);
    if (r.rows() == 0) continue;
    auto it = boundary.find(bc);
    VecQ rhs = (it != boundary.end()) ? it->second : VecQ(VecQ::Zero(r.rows()));
    rows += r.rows();
    blocks.push_back(std::move(r));
    rhss.push_back(std::move(rhs));
  }
  const auto& ls = mirrors.mirrors(ci, k);
  MatQ lmat(static_cast<Eigen::Index>(ls.size()), sys.space_dim(ci, k));
  for (size_t i = 0; i < ls.size(); ++i)
    for (Eigen::Index j = 0; j < sys.space_dim(ci, k); ++j)
      lmat(static_cast<Eigen::Index>(i), j) = mirrors.evaluate(
          cx, ls[i], sys.basis(ci, k)[static_cast<size_t>(j)]);
  MatQ mat(rows + lmat.rows(), sys.space_dim(ci, k));
  VecQ rhs = VecQ::Zero(rows + lmat.rows());
  Eigen::Index at = 0;
  for (size_t i = 0; i < blocks.size(); ++i) {
    mat.middleRows(at, blocks[i].rows()) = blocks[i];
    rhs.segment(at, rhss[i].size()) = rhss[i];
    at += blocks[i].rows();
  }
  mat.middleRows(at, lmat.rows()) = lmat;
  try {
    return solve(mat, rhs, true);
  } catch (const InconsistentSystem&) {
    throw NotExtendable("boundary data is not extendable on " +
                        cx.cell(ci).id);
  }
}

MatQ extension_matrix(const MirrorSystem& mirrors, const ElementSystem& sys,
                      int ci, int k, const GlobalSpace& boundary_space)
{
  MatQ out(sys.space_dim(ci, k), boundary_space.dim());
  for (Eigen::Index j = 0; j < boundary_space.dim(); ++j) {
    std::map<int, VecQ> data;
    for (const auto& [w, coords] :
         boundary_space.families[static_cast<size_t>(j)])
      data[w] = coords;
    out.col(j) = extension_from_mirrors(mirrors, sys, ci, k, data);
  }
  return out;
}

MatQ cell_interpolator_matrix(const MirrorSystem& mirrors,
                              const ElementSystem& sys,
                              const ElementSystem& host, int ci, int k)
{
  const Complex& cx = sys.complex();
  const auto& hb = host.basis(ci, k);
  MatQ out(sys.space_dim(ci, k), static_cast<Eigen::Index>(hb.size()));
  for (size_t j = 0; j < hb.size(); ++j) {
    // interpolate the host form over the subcomplex of T alone
    std::map<int, CellForm> fam;
    for (int w : cx.subcells(ci))
      fam[w] = hb[j].restricted(cx.cell(w).closure);
    std::map<int, VecQ> sol;
    {
      // restrict the sweep to the subcells of T
      auto value = [&](int cj, size_t idx) -> Rational {
        return mirrors.evaluate(cx, mirrors.mirrors(cj, k)[idx], fam.at(cj));
      };
      // sweep in dimension order over subcells only
      for (int w : cx.subcells(ci)) {
        if (k > cx.cell(w).dim || sys.space_dim(w, k) == 0) continue;
        const auto& ls = mirrors.mirrors(w, k);
        Eigen::Index rows = 0;
        std::vector<MatQ> blocks;
        std::vector<VecQ> rhss;
        for (int bc : cx.cell(w).boundary) {
          MatQ r = sys.restriction(w, bc, k);
          if (r.rows() == 0) continue;
          auto it = sol.find(bc);
          VecQ rhs =
              (it != sol.end()) ? it->second : VecQ(VecQ::Zero(r.rows()));
          rows += r.rows();
          blocks.push_back(std::move(r));
          rhss.push_back(std::move(rhs));
        }
        MatQ lmat(static_cast<Eigen::Index>(ls.size()), sys.space_dim(w, k));
        VecQ lvals(static_cast<Eigen::Index>(ls.size()));
        for (size_t i = 0; i < ls.size(); ++i) {
          for (Eigen::Index jj = 0; jj < sys.space_dim(w, k); ++jj)
            lmat(static_cast<Eigen::Index>(i), jj) = mirrors.evaluate(
                cx, ls[i], sys.basis(w, k)[static_cast<size_t>(jj)]);
          lvals(static_cast<Eigen::Index>(i)) = value(w, i);
        }
        MatQ mat(rows + lmat.rows(), sys.space_dim(w, k));
        VecQ rhs(rows + lmat.rows());
        Eigen::Index at = 0;
        for (size_t i = 0; i < blocks.size(); ++i) {
          mat.middleRows(at, blocks[i].rows()) = blocks[i];
          rhs.segment(at, rhss[i].size()) = rhss[i];
          at += blocks[i].rows();
        }
        mat.middleRows(at, lmat.rows()) = lmat;
        rhs.segment(at, lvals.size()) = lvals;
        sol[w] = solve(mat, rhs, true);
      }
    }
    out.col(static_cast<Eigen::Index>(j)) =
        sol.count(ci) ? sol[ci] : VecQ(VecQ::Zero(sys.space_dim(ci, k)));
  }
  return out;
}

MirrorSystem mirror_from_ie(const ElementSystem& sys,
                            const ElementSystem& host,
                            const MirrorSystem& source_mirrors)
{
  const Complex& cx = sys.complex();
  MirrorSystem out;
  out.set_host(&host);
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    const int m = cx.cell(ci).dim;
    for (int k = 0; k <= m; ++k) {
      if (host.space_dim(ci, k) == 0) continue;
      MatQ interp = cell_interpolator_matrix(source_mirrors, sys, host, ci, k);
      MatQ q;  // (id - E tr) I as a map host -> A^k(T) coordinates
      if (m == 0) {
        q = interp;
      } else {
        GlobalSpace bnd =
            global_space(sys, cx.boundary_complex_cells(ci), k);
        MatQ ext = extension_matrix(source_mirrors, sys, ci, k, bnd);
        // trace of A^k(T) into the boundary global coordinates
        MatQ tr(bnd.dim(), sys.space_dim(ci, k));
        for (Eigen::Index j = 0; j < sys.space_dim(ci, k); ++j) {
          std::map<int, VecQ> fam;
          for (int w : cx.boundary_complex_cells(ci)) {
            MatQ r = sys.restriction(ci, w, k);
            if (r.rows() == 0) continue;
            fam[w] = VecQ(r.col(j));
          }
          tr.col(j) = global_coords_of(sys, bnd, fam);
        }
        q = interp - ext * (tr * interp);
      }
      // annihilator of ker(q) = row space of q
      std::vector<Eigen::Index> piv;
      MatQ rr = rref(q, &piv);
      for (size_t i = 0; i < piv.size(); ++i) {
        MirrorFunctional l;
        l.kind = MirrorFunctional::Kind::Covector;
        l.covector = rr.row(static_cast<Eigen::Index>(i));
        out.add(ci, k, std::move(l));
      }
    }
  }
  return out;
}

EPInterpolator::EPInterpolator(const ElementSystem& sys,
                               const ElementSystem& host,
                               ExtensionProvider ext, ProjectionProvider proj)
    : sys_(&sys), host_(&host)
{
  const Complex& cx = sys.complex();
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    const int m = cx.cell(ci).dim;
    for (int k = 0; k <= m; ++k) {
      if (m >= 1 && k < m) {
        auto key = std::make_pair(ci, k);
        boundary_spaces_.emplace(
            key, global_space(sys, cx.boundary_complex_cells(ci), k));
        ext_[key] = ext(ci, k, boundary_spaces_.at(key));
      }
      proj_[{ci, k}] = proj(ci, k);
    }
  }
  verify_preconditions();
}

const GlobalSpace& EPInterpolator::boundary_space(int ci, int k) const
{
  return boundary_spaces_.at({ci, k});
}

void EPInterpolator::verify_preconditions() const
{
  const Complex& cx = sys_->complex();
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    const int m = cx.cell(ci).dim;
    const std::string& id = cx.cell(ci).id;
    // P commutes with d and fixes A
    for (int k = 0; k < m; ++k) {
      MatQ lhs = proj_.at({ci, k + 1}) * host_->cell_d(ci, k);
      MatQ rhs = sys_->cell_d(ci, k) * proj_.at({ci, k});
      if (lhs != rhs)
        throw PreconditionFailed("P d != d P on " + id +
                                 " at k=" + std::to_string(k));
    }
    for (int k = 0; k <= m; ++k) {
      // P restricted to A^k(T) is the identity
      const auto& ab = sys_->basis(ci, k);
      for (size_t j = 0; j < ab.size(); ++j) {
        VecQ hc = host_->coords_of(ci, k, ab[j]);
        VecQ back = proj_.at({ci, k}) * hc;
        for (Eigen::Index i = 0; i < back.size(); ++i)
          if (back(i) != (static_cast<size_t>(i) == j ? Rational(1)
                                                      : Rational(0)))
            throw PreconditionFailed("P does not fix A^k on " + id);
      }
    }
    // P preserves integrals at top degree
    {
      const auto& hb = host_->basis(ci, m);
      for (size_t j = 0; j < hb.size(); ++j) {
        VecQ coords = VecQ::Zero(static_cast<Eigen::Index>(hb.size()));
        coords(static_cast<Eigen::Index>(j)) = 1;
        VecQ pc = proj_.at({ci, m}) * coords;
        CellForm pu = sys_->from_coords(ci, m, pc);
        if (integrate_cell(cx, ci, pu) != integrate_cell(cx, ci, hb[j]))
          throw PreconditionFailed("P does not preserve integrals on " + id);
      }
    }
    if (m == 0) continue;
    // E must commute with d slotwise across the boundary sequence
    // head: E^0 maps the constant 1 on dT to the constant 1 on T
    {
      const GlobalSpace& bnd = boundary_spaces_.at({ci, 0});
      CellForm one(0);
      for (int s : cx.cell(ci).closure)
        one.set_part(s, constant_form(cx.simplex(s).dim(), 0, Rational(1)));
      std::map<int, VecQ> fam;
      for (int w : cx.boundary_complex_cells(ci))
        fam[w] = sys_->coords_of(w, 0, one.restricted(cx.cell(w).closure));
      VecQ bc = global_coords_of(*sys_, bnd, fam);
      VecQ et = ext_.at({ci, 0}) * bc;
      VecQ own = sys_->coords_of(ci, 0, one);
      if (et != own)
        throw PreconditionFailed("E does not send 1 to 1 on " + id);
    }
    for (int k = 0; k + 1 < m; ++k) {
      const GlobalSpace& b0 = boundary_spaces_.at({ci, k});
      const GlobalSpace& b1 = boundary_spaces_.at({ci, k + 1});
      MatQ dbnd = global_d_matrix(*sys_, b0, b1);
      MatQ lhs = ext_.at({ci, k + 1}) * dbnd;
      MatQ rhs = sys_->cell_d(ci, k) * ext_.at({ci, k});
      if (lhs != rhs)
        throw PreconditionFailed("E d != d E on " + id +
                                 " at k=" + std::to_string(k));
    }
    // tail: d E^{m-1} u depends only on the boundary integral of u
    {
      const GlobalSpace& bm = boundary_spaces_.at({ci, m - 1});
      MatQ e = ext_.at({ci, m - 1});
      // boundary integral row: sum over (m-1)-cells with o(T, .) signs
      RowVecQ total(bm.dim());
      for (Eigen::Index j = 0; j < bm.dim(); ++j) {
        Rational v(0);
        for (const auto& [w, coords] : bm.families[static_cast<size_t>(j)]) {
          if (cx.cell(w).dim != m - 1) continue;
          CellForm u = sys_->from_coords(w, m - 1, coords);
          v += Rational(cx.incidence(ci, w)) * integrate_cell(cx, w, u);
        }
        total(j) = v;
      }
      MatQ de = sys_->cell_d(ci, m - 1) * e;
      // on ker(total) the image must vanish
      MatQ kerb = nullspace(MatQ(total));
      MatQ z = de * kerb;
      for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j)
          if (z(i, j) != 0)
            throw PreconditionFailed(
                "E^m tail: zero-integral boundary data maps to a non-closed "
                "form on " +
                id);
    }
    // E is a right inverse of the trace
    for (int k = 0; k < m; ++k) {
      const GlobalSpace& bnd = boundary_spaces_.at({ci, k});
      MatQ e = ext_.at({ci, k});
      MatQ tr(bnd.dim(), sys_->space_dim(ci, k));
      for (Eigen::Index j = 0; j < sys_->space_dim(ci, k); ++j) {
        std::map<int, VecQ> fam;
        for (int w : cx.boundary_complex_cells(ci)) {
          MatQ r = sys_->restriction(ci, w, k);
          if (r.rows() == 0) continue;
          fam[w] = VecQ(r.col(j));
        }
        tr.col(j) = global_coords_of(*sys_, bnd, fam);
      }
      MatQ idm = tr * e;
      if (idm != MatQ::Identity(idm.rows(), idm.cols()))
        throw PreconditionFailed("E is not a right inverse of the trace on " +
                                 id);
    }
  }
}

std::map<int, VecQ> EPInterpolator::apply(const std::map<int, VecQ>& host_coords,
                                          int k) const
{
  const Complex& cx = sys_->complex();
  std::map<int, VecQ> out;
  for (int m = k; m <= cx.dim(); ++m) {
    for (int ci : cx.cells_of_dim(m)) {
      if (sys_->space_dim(ci, k) == 0) continue;
      auto it = host_coords.find(ci);
      if (it == host_coords.end())
        throw InconsistentInput("host family missing cell " + cx.cell(ci).id);
      VecQ pu = proj_.at({ci, k}) * it->second;
      if (k == m) {
        out[ci] = pu;  // top degree: J = P
        continue;
      }
      const GlobalSpace& bnd = boundary_spaces_.at({ci, k});
      // J u on the boundary (already computed) and the trace of P u
      std::map<int, VecQ> jfam;
      for (int w : cx.boundary_complex_cells(ci)) {
        auto jt = out.find(w);
        if (jt != out.end()) jfam[w] = jt->second;
      }
      VecQ jb = global_coords_of(*sys_, bnd, jfam);
      std::map<int, VecQ> pfam;
      for (int w : cx.boundary_complex_cells(ci)) {
        MatQ r = sys_->restriction(ci, w, k);
        if (r.rows() == 0) continue;
        pfam[w] = VecQ(r * pu);
      }
      VecQ pb = global_coords_of(*sys_, bnd, pfam);
      out[ci] = pu + ext_.at({ci, k}) * (jb - pb);
    }
  }
  return out;
}

EPInterpolator::ExtensionProvider mirror_extension_provider(
    const MirrorSystem& mirrors, const ElementSystem& sys)
{
  return [&mirrors, &sys](int ci, int k, const GlobalSpace& bnd) {
    return extension_matrix(mirrors, sys, ci, k, bnd);
  };
}

EPInterpolator::ProjectionProvider mirror_projection_provider(
    const MirrorSystem& mirrors, const ElementSystem& sys,
    const ElementSystem& host)
{
  return [&mirrors, &sys, &host](int ci, int k) {
    return cell_interpolator_matrix(mirrors, sys, host, ci, k);
  };
}

EPInterpolator::ExtensionProvider harmonic_extension_provider(
    const ElementSystem& sys, const CellProducts& a)
{
  return [&sys, &a](int ci, int k, const GlobalSpace& bnd) {
    MatQ out(sys.space_dim(ci, k), bnd.dim());
    for (Eigen::Index j = 0; j < bnd.dim(); ++j) {
      std::map<int, VecQ> data;
      for (const auto& [w, coords] : bnd.families[static_cast<size_t>(j)])
        data[w] = coords;
      out.col(j) = harmonic_extension(sys, a, ci, k, data);
    }
    return out;
  };
}

std::string dof_table_json(const MirrorSystem& mirrors,
                           const ElementSystem& sys)
{
  const Complex& cx = sys.complex();
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    for (int k = 0; k <= cx.cell(ci).dim; ++k) {
      const auto& ls = mirrors.mirrors(ci, k);
      for (size_t i = 0; i < ls.size(); ++i) {
        nlohmann::ordered_json row;
        row["cell"] = cx.cell(ci).id;
        row["k"] = k;
        row["index"] = i;
        nlohmann::ordered_json entries = nlohmann::ordered_json::array();
        for (Eigen::Index j = 0; j < sys.space_dim(ci, k); ++j)
          entries.push_back(
              mirrors.evaluate(cx, ls[i], sys.basis(ci, k)[static_cast<size_t>(j)])
                  .get_str());
        row["covector"] = std::move(entries);
        rows.push_back(std::move(row));
      }
    }
  }
  nlohmann::ordered_json j;
  j["dofs"] = std::move(rows);
  return j.dump(2) + "\n";
}

EPInterpolator::ProjectionProvider l2_projection_provider(
    const ElementSystem& sys, const ElementSystem& host, const CellProducts& a)
{
  return [&sys, &host, &a](int ci, int k) {
    const auto& ab = sys.basis(ci, k);
    const auto& hb = host.basis(ci, k);
    MatQ gram = a.gram(sys, ci, k);
    MatQ pairing(static_cast<Eigen::Index>(ab.size()),
                 static_cast<Eigen::Index>(hb.size()));
    for (size_t i = 0; i < ab.size(); ++i)
      for (size_t j = 0; j < hb.size(); ++j)
        pairing(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            a.pair(sys.complex(), ci, ab[i], hb[j]);
    if (pairing.rows() == 0) return MatQ(pairing);
    return MatQ(inverse(gram) * pairing);
  };
}

}  // namespace fes
