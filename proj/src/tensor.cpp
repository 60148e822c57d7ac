#include "fes/tensor.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace fes {

namespace {

// Monotone lattice paths through the (m+1) x (n+1) grid of vertex pairs:
// the staircase triangulation of a simplex product.
void staircase_paths(int m, int n,
                     std::vector<std::vector<std::pair<int, int>>>& out)
{
  std::vector<std::pair<int, int>> path{{0, 0}};
  std::function<void()> rec = [&]() {
    auto [i, j] = path.back();
    if (i == m && j == n) {
      out.push_back(path);
      return;
    }
    if (i < m) {
      path.push_back({i + 1, j});
      rec();
      path.pop_back();
    }
    if (j < n) {
      path.push_back({i, j + 1});
      rec();
      path.pop_back();
    }
  };
  rec();
}

std::vector<int> path_vertices(const Complex& u, const Complex& v, int sigma,
                               int tau,
                               const std::vector<std::pair<int, int>>& path)
{
  const auto& sv = u.simplex(sigma).verts;
  const auto& tv = v.simplex(tau).verts;
  std::vector<int> out;
  for (auto [i, j] : path)
    out.push_back(sv[static_cast<size_t>(i)] * v.num_vertices() +
                  tv[static_cast<size_t>(j)]);
  return out;
}

// Relative orientation of a staircase simplex against the product frame
// (edges of sigma in the U block, then edges of tau in the V block).
int staircase_sign(const Complex& prod, const Complex& u, const Complex& v,
                   int sigma, int tau, int prod_simplex)
{
  const int du = u.ambient_dim();
  const int m = u.simplex(sigma).dim();
  const int n = v.simplex(tau).dim();
  if (m + n == 0) return 1;
  MatQ frame = MatQ::Zero(du + v.ambient_dim(), m + n);
  AffineEmbed cu = u.chart(sigma), cv = v.chart(tau);
  if (m > 0) frame.block(0, 0, du, m) = cu.linear;
  if (n > 0) frame.block(du, m, v.ambient_dim(), n) = cv.linear;
  AffineEmbed cp = prod.chart(prod_simplex);
  MatQ rel = solve_matrix(frame, MatQ(cp.linear), true);
  Rational det = determinant(rel);
  return det > 0 ? 1 : -1;
}

// Affine map from a product simplex chart into a factor simplex chart.
AffineEmbed factor_chart(const Complex& prod, const Complex& factor,
                         int prod_simplex, int factor_simplex, int row_begin,
                         int rows)
{
  AffineEmbed cp = prod.chart(prod_simplex);
  AffineEmbed cf = factor.chart(factor_simplex);
  MatQ proj_lin = cp.linear.middleRows(row_begin, rows);
  VecQ proj_off = cp.offset.segment(row_begin, rows);
  if (cf.source_dim() == 0) {
    AffineEmbed out;
    out.linear = MatQ::Zero(0, proj_lin.cols());
    out.offset = VecQ::Zero(0);
    return out;
  }
  MatQ rhs(rows, 1 + proj_lin.cols());
  rhs.col(0) = proj_off - cf.offset;
  rhs.rightCols(proj_lin.cols()) = proj_lin;
  MatQ sol = solve_matrix(MatQ(cf.linear), rhs, true);
  AffineEmbed out;
  out.offset = sol.col(0);
  out.linear = sol.rightCols(proj_lin.cols());
  return out;
}

}  // namespace

ProductComplex product_complex(const Complex& u, const Complex& v)
{
  if (!u.is_pure_simplicial() || !v.is_pure_simplicial())
    throw NotSimplicial("product complex needs simplicial factors");
  const int du = u.ambient_dim(), dv = v.ambient_dim();
  const int nv = v.num_vertices();

  std::vector<VecQ> verts;
  for (int a = 0; a < u.num_vertices(); ++a)
    for (int b = 0; b < nv; ++b) {
      VecQ x(du + dv);
      x.head(du) = u.vertex(a);
      x.tail(dv) = v.vertex(b);
      verts.push_back(std::move(x));
    }

  auto maximal = [](const Complex& cx) {
    std::vector<int> out;
    std::vector<char> has_coface(static_cast<size_t>(cx.num_simplices()), 0);
    for (int s = 0; s < cx.num_simplices(); ++s)
      for (const auto& [f, c] : cx.simplex_facets(s))
        has_coface[static_cast<size_t>(f)] = 1;
    for (int s = 0; s < cx.num_simplices(); ++s)
      if (!has_coface[static_cast<size_t>(s)]) out.push_back(s);
    return out;
  };
  std::vector<std::vector<int>> tops;
  for (int sigma : maximal(u))
    for (int tau : maximal(v)) {
      std::vector<std::vector<std::pair<int, int>>> paths;
      staircase_paths(u.simplex(sigma).dim(), v.simplex(tau).dim(), paths);
      for (const auto& p : paths)
        tops.push_back(path_vertices(u, v, sigma, tau, p));
    }

  // First pass: the substrate alone, to resolve staircase simplex ids.
  Complex substrate = Complex::simplicial(du + dv, verts, tops);

  ProductComplex out;
  out.u_ambient = du;
  std::vector<AgglomerationSpec> specs;
  std::vector<std::pair<int, int>> spec_factors;
  for (int a = 0; a < u.num_cells(); ++a)
    for (int b = 0; b < v.num_cells(); ++b) {
      AgglomerationSpec spec;
      spec.id = u.cell(a).id + "x" + v.cell(b).id;
      for (const auto& [sigma, su] : u.cell(a).support)
        for (const auto& [tau, sv] : v.cell(b).support) {
          std::vector<std::vector<std::pair<int, int>>> paths;
          staircase_paths(u.simplex(sigma).dim(), v.simplex(tau).dim(), paths);
          for (const auto& p : paths) {
            int sid =
                substrate.find_simplex(path_vertices(u, v, sigma, tau, p));
            if (sid < 0) throw NonComplex("missing staircase simplex");
            spec.simplices.push_back(sid);
            spec.orientation[sid] =
                su * sv * staircase_sign(substrate, u, v, sigma, tau, sid);
          }
        }
      std::sort(spec.simplices.begin(), spec.simplices.end());
      spec_factors.push_back({a, b});
      specs.push_back(std::move(spec));
    }
  out.complex = Complex::with_cells(du + dv, verts, tops, specs);
  if (out.complex.num_cells() != static_cast<int>(specs.size()))
    throw NonComplex("product cells did not close the complex");
  for (size_t i = 0; i < specs.size(); ++i) {
    int ci = out.complex.cell_index(specs[i].id);
    out.cell_of[spec_factors[i]] = ci;
    out.factors_of[ci] = spec_factors[i];
  }
  return out;
}

ElementSystem tensor_system(const ProductComplex& pc, const Complex& u,
                            const Complex& v, const ElementSystem& a,
                            const ElementSystem& b)
{
  const Complex& prod = pc.complex;
  ElementSystem sys(prod);
  for (const auto& [factors, ci] : pc.cell_of) {
    auto [cu, cv] = factors;
    int sigma = u.cell(cu).support[0].first;
    int tau = v.cell(cv).support[0].first;
    const int mu = u.simplex(sigma).dim();
    const int mv = v.simplex(tau).dim();
    for (int k = 0; k <= mu + mv; ++k) {
      std::vector<CellForm> basis;
      for (int l = std::max(0, k - mv); l <= std::min(k, mu); ++l) {
        for (const auto& ui : a.basis(cu, l)) {
          for (const auto& vj : b.basis(cv, k - l)) {
            std::map<int, PolyForm> parts;
            for (const auto& [s, sgn] : prod.cell(ci).support) {
              AffineEmbed pu =
                  factor_chart(prod, u, s, sigma, 0, u.ambient_dim());
              AffineEmbed pv = factor_chart(prod, v, s, tau, u.ambient_dim(),
                                            v.ambient_dim());
              parts[s] = wedge(pullback(pu, ui.part(sigma)),
                               pullback(pv, vj.part(tau)));
            }
            basis.push_back(complete_from_support(prod, ci, std::move(parts)));
          }
        }
      }
      sys.set_basis(ci, k, std::move(basis));
    }
  }
  sys.verify_closure();
  return sys;
}

namespace {

std::vector<int> product_view(const ProductComplex& pc,
                              const std::vector<int>& ucells,
                              const std::vector<int>& vcells)
{
  std::vector<int> out;
  for (int a : ucells)
    for (int b : vcells) out.push_back(pc.cell_of.at({a, b}));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TensorCheckReport tensor_dimension_checks(const ProductComplex& pc,
                                          const Complex& u, const Complex& v,
                                          const ElementSystem& a,
                                          const ElementSystem& b,
                                          const ElementSystem& c)
{
  TensorCheckReport report;
  const Complex& prod = pc.complex;

  // boundary-kernel product identity: kernels multiply, cell by cell.
  report.kernel_identity = true;
  for (const auto& [factors, ci] : pc.cell_of) {
    auto [cu, cv] = factors;
    const int mp = prod.cell(ci).dim;
    int sigma = u.cell(cu).support[0].first;
    int tau = v.cell(cv).support[0].first;
    for (int k = 0; k <= mp; ++k) {
      Eigen::Index expect = 0;
      for (int l = std::max(0, k - v.cell(cv).dim);
           l <= std::min(k, u.cell(cu).dim); ++l)
        expect +=
            a.kernel_coords(cu, l).cols() * b.kernel_coords(cv, k - l).cols();
      MatQ ker = c.kernel_coords(ci, k);
      if (ker.cols() != expect) {
        report.kernel_identity = false;
        report.detail = "kernel product dimension mismatch on " + prod.cell(ci).id;
        continue;
      }
      for (int l = std::max(0, k - v.cell(cv).dim);
           l <= std::min(k, u.cell(cu).dim); ++l) {
        MatQ ka = a.kernel_coords(cu, l);
        MatQ kb = b.kernel_coords(cv, k - l);
        for (Eigen::Index i = 0; i < ka.cols(); ++i)
          for (Eigen::Index j = 0; j < kb.cols(); ++j) {
            CellForm ua = a.from_coords(cu, l, VecQ(ka.col(i)));
            CellForm vb = b.from_coords(cv, k - l, VecQ(kb.col(j)));
            std::map<int, PolyForm> parts;
            for (const auto& [s, sgn] : prod.cell(ci).support) {
              AffineEmbed pu =
                  factor_chart(prod, u, s, sigma, 0, u.ambient_dim());
              AffineEmbed pv = factor_chart(prod, v, s, tau, u.ambient_dim(),
                                            v.ambient_dim());
              parts[s] = wedge(pullback(pu, ua.part(sigma)),
                               pullback(pv, vb.part(tau)));
            }
            CellForm w = complete_from_support(prod, ci, std::move(parts));
            VecQ coords = c.coords_of(ci, k, w);
            if (!in_span(ker, coords)) {
              report.kernel_identity = false;
              report.detail =
                  "tensor kernel escapes C_0 on " + prod.cell(ci).id;
            }
          }
      }
    }
  }

  // global dimension product identity.
  report.global_dims = true;
  const int dmax = prod.dim();
  std::vector<Eigen::Index> adims(static_cast<size_t>(u.dim()) + 1, 0);
  std::vector<Eigen::Index> bdims(static_cast<size_t>(v.dim()) + 1, 0);
  for (int l = 0; l <= u.dim(); ++l)
    adims[static_cast<size_t>(l)] = global_space(a, u.all_cells(), l).dim();
  for (int l = 0; l <= v.dim(); ++l)
    bdims[static_cast<size_t>(l)] = global_space(b, v.all_cells(), l).dim();
  for (int k = 0; k <= dmax; ++k) {
    Eigen::Index expect = 0;
    for (int l = std::max(0, k - v.dim()); l <= std::min(k, u.dim()); ++l)
      expect +=
          adims[static_cast<size_t>(l)] * bdims[static_cast<size_t>(k - l)];
    Eigen::Index got = global_space(c, prod.all_cells(), k).dim();
    if (got != expect) {
      report.global_dims = false;
      report.detail = "global dimension product fails at k=" + std::to_string(k);
    }
  }

  // extensions, plus the Mayer-Vietoris inclusion-exclusion count.
  report.extensions = true;
  for (int ci = 0; ci < prod.num_cells(); ++ci)
    for (int k = 0; k <= prod.cell(ci).dim; ++k)
      if (!check_extension(c, ci, k)) {
        report.extensions = false;
        report.detail = "extensions fail on " + prod.cell(ci).id;
      }
  report.mayer_vietoris = true;
  for (const auto& [factors, ci] : pc.cell_of) {
    auto [cu, cv] = factors;
    if (u.cell(cu).dim == 0 || v.cell(cv).dim == 0) continue;
    std::vector<int> usub = u.subcells(cu), vsub = v.subcells(cv);
    std::vector<int> ubnd, vbnd;
    for (int w : usub)
      if (w != cu) ubnd.push_back(w);
    for (int w : vsub)
      if (w != cv) vbnd.push_back(w);
    std::vector<int> view_du_v = product_view(pc, ubnd, vsub);
    std::vector<int> view_u_dv = product_view(pc, usub, vbnd);
    std::vector<int> view_du_dv = product_view(pc, ubnd, vbnd);
    std::vector<int> view_bnd = prod.boundary_complex_cells(ci);
    for (int k = 0; k <= prod.cell(ci).dim; ++k) {
      GlobalSpace w0 = global_space(c, view_bnd, k);
      GlobalSpace w1a = global_space(c, view_du_v, k);
      GlobalSpace w1b = global_space(c, view_u_dv, k);
      GlobalSpace w2 = global_space(c, view_du_dv, k);
      if (w0.dim() != w1a.dim() + w1b.dim() - w2.dim()) {
        report.extensions = false;
        report.detail = "Mayer-Vietoris count fails on " + prod.cell(ci).id;
      }
      auto restrict_to = [&](const GlobalSpace& from, const GlobalSpace& to,
                             Eigen::Index j) {
        std::map<int, VecQ> fam;
        for (int w : to.cells) {
          auto it = from.families[static_cast<size_t>(j)].find(w);
          if (it != from.families[static_cast<size_t>(j)].end())
            fam[w] = it->second;
        }
        return global_coords_of(c, to, fam);
      };
      MatQ r1(w1a.dim() + w1b.dim(), w0.dim());
      for (Eigen::Index j = 0; j < w0.dim(); ++j) {
        r1.block(0, j, w1a.dim(), 1) = restrict_to(w0, w1a, j);
        r1.block(w1a.dim(), j, w1b.dim(), 1) = restrict_to(w0, w1b, j);
      }
      MatQ r2(w2.dim(), w1a.dim() + w1b.dim());
      for (Eigen::Index j = 0; j < w1a.dim(); ++j)
        r2.col(j) = restrict_to(w1a, w2, j);
      for (Eigen::Index j = 0; j < w1b.dim(); ++j)
        r2.col(w1a.dim() + j) = -restrict_to(w1b, w2, j);
      bool injective = rank(r1) == w0.dim();
      bool middle = (w1a.dim() + w1b.dim() - rank(r2)) == rank(r1);
      bool onto = rank(r2) == w2.dim();
      if (!injective || !middle || !onto) {
        report.mayer_vietoris = false;
        report.detail = "Mayer-Vietoris sequence inexact on " + prod.cell(ci).id;
      }
    }
  }

  // local exactness of the tensor system.
  report.local_exactness = true;
  for (int ci = 0; ci < prod.num_cells(); ++ci)
    if (!check_exactness_interior(c, ci)) {
      report.local_exactness = false;
      report.detail = "tensor system inexact on " + prod.cell(ci).id;
    }
  return report;
}

MirrorSystem tensor_mirrors(const ProductComplex& pc, const Complex& u,
                            const Complex& v, const ElementSystem& a,
                            const ElementSystem& b, const MirrorSystem& z,
                            const MirrorSystem& y)
{
  try {
    if (!faithfulness_check(z, a) || !faithfulness_check(y, b))
      throw NotFaithfulInputs("tensor mirrors need faithful factors");
  } catch (const ExtensionsUnverified& e) {
    throw NotFaithfulInputs(e.what());
  }
  const Complex& prod = pc.complex;
  MirrorSystem out;
  auto as_weight = [](const MirrorFunctional& l, const Complex& cx,
                      int sid) -> PolyForm {
    const int m = cx.simplex(sid).dim();
    if (l.kind == MirrorFunctional::Kind::Wedge) return l.wedge_weight.at(sid);
    if (l.kind == MirrorFunctional::Kind::Integral)
      return constant_form(m, 0, Rational(1));
    throw HostSpaceTooSmall("tensor mirrors need wedge-type factors");
  };
  for (const auto& [factors, ci] : pc.cell_of) {
    auto [cu, cv] = factors;
    int sigma = u.cell(cu).support[0].first;
    int tau = v.cell(cv).support[0].first;
    const int mp = prod.cell(ci).dim;
    for (int k = 0; k <= mp; ++k) {
      for (int l = std::max(0, k - v.cell(cv).dim);
           l <= std::min(k, u.cell(cu).dim); ++l) {
        for (const auto& lz : z.mirrors(cu, l)) {
          for (const auto& ly : y.mirrors(cv, k - l)) {
            MirrorFunctional m;
            m.kind = MirrorFunctional::Kind::Wedge;
            for (const auto& [s, sgn] : prod.cell(ci).support) {
              AffineEmbed puj =
                  factor_chart(prod, u, s, sigma, 0, u.ambient_dim());
              AffineEmbed pvj = factor_chart(prod, v, s, tau, u.ambient_dim(),
                                             v.ambient_dim());
              m.wedge_weight[s] = wedge(pullback(puj, as_weight(lz, u, sigma)),
                                        pullback(pvj, as_weight(ly, v, tau)));
            }
            out.add(ci, k, std::move(m));
          }
        }
      }
    }
  }
  return out;
}

}  // namespace fes
