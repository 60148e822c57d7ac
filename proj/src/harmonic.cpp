#include "fes/harmonic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <set>
#include <thread>

namespace fes {

namespace {

MatQ chart_metric(const Complex& cx, int sid)
{
  AffineEmbed chart = cx.chart(sid);
  return MatQ(chart.linear.transpose() * chart.linear);
}

double minor_det(const MatD& ginv, const std::vector<int>& ri,
                 const std::vector<int>& rj)
{
  switch (ri.size()) {
    case 0:
      return 1.0;
    case 1:
      return ginv(ri[0], rj[0]);
    case 2:
      return ginv(ri[0], rj[0]) * ginv(ri[1], rj[1]) -
             ginv(ri[0], rj[1]) * ginv(ri[1], rj[0]);
    default: {
      Eigen::Matrix3d sub;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) sub(a, b) = ginv(ri[static_cast<size_t>(a)], rj[static_cast<size_t>(b)]);
      return sub.determinant();
    }
  }
}

}  // namespace

CellProducts CellProducts::euclidean(const Complex& cx)
{
  CellProducts out;
  out.exact_ = true;
  for (int s = 0; s < cx.num_simplices(); ++s) {
    ExactPart part;
    const int m = cx.simplex(s).dim();
    if (m == 0) {
      part.ginv = MatQ::Zero(0, 0);
      part.density = 1;
    } else {
      part.ginv = inverse(chart_metric(cx, s));
      if (m == cx.ambient_dim()) {
        Rational det = determinant(cx.chart(s).linear);
        part.density = det < 0 ? Rational(-det) : det;
      } else {
        part.density = 1;
      }
    }
    out.exact_parts_[s] = std::move(part);
  }
  return out;
}

CellProducts CellProducts::piecewise_metric(const Complex& cx,
                                            const std::map<int, MatQ>& metric)
{
  CellProducts out;
  out.exact_ = true;
  for (int s = 0; s < cx.num_simplices(); ++s) {
    ExactPart part;
    const int m = cx.simplex(s).dim();
    if (m == 0) {
      part.ginv = MatQ::Zero(0, 0);
      part.density = 1;
    } else {
      AffineEmbed chart = cx.chart(s);
      MatQ amb = metric.count(s)
                     ? metric.at(s)
                     : MatQ(MatQ::Identity(cx.ambient_dim(), cx.ambient_dim()));
      MatQ g = chart.linear.transpose() * amb * chart.linear;
      part.ginv = inverse(g);
      part.density = 1;
    }
    out.exact_parts_[s] = std::move(part);
  }
  return out;
}

Rational CellProducts::pair(const Complex& cx, int ci, const CellForm& u,
                            const CellForm& v) const
{
  if (!exact_) throw QuadratureFailure("pair: product is not exact");
  Rational total(0);
  for (const auto& [s, sgn] : cx.cell(ci).support) {
    const ExactPart& part = exact_parts_.at(s);
    const int m = cx.simplex(s).dim();
    PolyForm inner = pointwise_inner(u.part(s), v.part(s), part.ginv);
    if (m == 0) {
      total += part.density * integrate_std(inner);
      continue;
    }
    PolyForm vol = constant_form(m, (AltMask(1) << m) - 1u, Rational(1));
    total += part.density * integrate_std(wedge(inner, vol));
  }
  return total;
}

MatQ CellProducts::gram(const ElementSystem& sys, int ci, int k) const
{
  const auto& b = sys.basis(ci, k);
  const Eigen::Index n = static_cast<Eigen::Index>(b.size());
  MatQ out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      Rational v = pair(sys.complex(), ci, b[static_cast<size_t>(i)],
                        b[static_cast<size_t>(j)]);
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

double CellProducts::pair_num(const Complex& cx, int ci, const CellForm& u,
                              const CellForm& v) const
{
  if (exact_) return pair(cx, ci, u, v).get_d();
  auto ueval = [&](int s, const VecD& t) { return u.part(s).evaluate(t); };
  return pair_num_callable(cx, ci, ueval, v);
}

double CellProducts::pair_num_callable(
    const Complex& cx, int ci,
    const std::function<std::map<AltMask, double>(int, const VecD&)>& u,
    const CellForm& v) const
{
  double total = 0;
  for (const auto& [s, sgn] : cx.cell(ci).support) {
    const int m = cx.simplex(s).dim();
    MatD ginv;
    double density = 1.0;
    std::function<double(const VecD&)> weight = [](const VecD&) { return 1.0; };
    if (exact_) {
      const ExactPart& part = exact_parts_.at(s);
      ginv = to_double(part.ginv);
      density = part.density.get_d();
    } else {
      const NumericPart& part = numeric_parts_.at(s);
      ginv = part.ginv;
      density = part.density;
      weight = part.weight;
    }
    if (m == 0) {
      auto uu = u(s, VecD(0));
      auto vv = v.part(s).evaluate(VecD(0));
      double val = 0;
      for (const auto& [mask, x] : uu)
        if (vv.count(mask)) val += x * vv.at(mask);
      total += density * weight(VecD(0)) * val;
      continue;
    }
    QuadRule rule = simplex_rule(m, quad_degree_);
    for (Eigen::Index q = 0; q < rule.size(); ++q) {
      VecD t = rule.points.col(q);
      auto uu = u(s, t);
      auto vv = v.part(s).evaluate(t);
      double val = 0;
      for (const auto& [mi, xi] : uu)
        for (const auto& [mj, xj] : vv) {
          if (mask_size(mi) != mask_size(mj)) continue;
          val += xi * xj * minor_det(ginv, mask_indices(mi), mask_indices(mj));
        }
      total += density * rule.weights(q) * weight(t) * val;
    }
  }
  return total;
}

MatD CellProducts::gram_num(const ElementSystem& sys, int ci, int k) const
{
  const auto& b = sys.basis(ci, k);
  const Eigen::Index n = static_cast<Eigen::Index>(b.size());
  MatD out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const CellForm& bi = b[static_cast<size_t>(i)];
      auto ueval = [&](int s, const VecD& t) { return bi.part(s).evaluate(t); };
      double v = pair_num_callable(sys.complex(), ci, ueval,
                                   b[static_cast<size_t>(j)]);
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

CellProducts upwinded_products(const Complex& cx,
                               const std::map<int, VecD>& alpha, int sign,
                               int quad_degree)
{
  CellProducts out;
  out.exact_ = false;
  out.quad_degree_ = quad_degree;
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    const Cell& cell = cx.cell(ci);
    VecD alpha_T =
        alpha.count(ci) ? alpha.at(ci) : VecD(VecD::Zero(cx.ambient_dim()));
    // Volume-weighted centroid fixes the zero-mean constant of beta_T.
    VecD centroid = VecD::Zero(cx.ambient_dim());
    double volsum = 0;
    for (const auto& [s, sgn] : cell.support) {
      MatD v = to_double(cx.simplex_vertex_matrix(s));
      AffineEmbed chart = cx.chart(s);
      MatD e = to_double(MatQ(chart.linear));
      double vol = (cx.simplex(s).dim() == 0)
                       ? 1.0
                       : std::sqrt(std::abs((e.transpose() * e).determinant()));
      centroid += vol * v.rowwise().mean();
      volsum += vol;
    }
    if (volsum > 0) centroid /= volsum;
    for (const auto& [s, sgn] : cell.support) {
      CellProducts::NumericPart part;
      AffineEmbed chart = cx.chart(s);
      MatD e = to_double(MatQ(chart.linear));
      VecD b0 = to_double(VecQ(chart.offset));
      const int m = cx.simplex(s).dim();
      if (m == 0) {
        part.ginv = MatD::Zero(0, 0);
        part.density = 1.0;
      } else {
        MatD g = e.transpose() * e;
        part.ginv = g.inverse();
        part.density = std::sqrt(std::abs(g.determinant()));
      }
      const VecD a = alpha_T;
      const VecD c = centroid;
      const double s_sign = sign >= 0 ? 1.0 : -1.0;
      part.weight = [e, b0, a, c, s_sign](const VecD& t) {
        VecD x = b0 + e * t;
        return std::exp(-s_sign * a.dot(x - c));
      };
      out.numeric_parts_[s] = std::move(part);
    }
  }
  return out;
}

namespace {

// Rows enforcing A-harmonicity of the trace of A^k(T) on subcell w.
MatQ harmonicity_rows(const ElementSystem& sys, const CellProducts& a, int ci,
                      int k, int w)
{
  MatQ r = sys.restriction(ci, w, k);
  std::vector<MatQ> blocks;
  Eigen::Index rows = 0;
  if (sys.space_dim(w, k + 1) > 0) {
    MatQ dk = sys.cell_d(w, k);
    MatQ ker = sys.kernel_coords(w, k);
    if (ker.cols() > 0) {
      MatQ g = a.gram(sys, w, k + 1);
      MatQ block = (dk * ker).transpose() * g * dk * r;
      rows += block.rows();
      blocks.push_back(std::move(block));
    }
  }
  if (k >= 1 && sys.space_dim(w, k - 1) > 0) {
    MatQ dkm = sys.cell_d(w, k - 1);
    MatQ ker = sys.kernel_coords(w, k - 1);
    if (ker.cols() > 0) {
      MatQ g = a.gram(sys, w, k);
      MatQ block = (dkm * ker).transpose() * g * r;
      rows += block.rows();
      blocks.push_back(std::move(block));
    }
  }
  MatQ out(rows, sys.space_dim(ci, k));
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return out;
}

MatD harmonicity_rows_num(const ElementSystem& sys, const CellProducts& a,
                          int ci, int k, int w)
{
  MatD r = to_double(sys.restriction(ci, w, k));
  std::vector<MatD> blocks;
  Eigen::Index rows = 0;
  if (sys.space_dim(w, k + 1) > 0) {
    MatD dk = to_double(sys.cell_d(w, k));
    MatD ker = to_double(sys.kernel_coords(w, k));
    if (ker.cols() > 0) {
      MatD g = a.gram_num(sys, w, k + 1);
      MatD block = (dk * ker).transpose() * g * dk * r;
      rows += block.rows();
      blocks.push_back(std::move(block));
    }
  }
  if (k >= 1 && sys.space_dim(w, k - 1) > 0) {
    MatD dkm = to_double(sys.cell_d(w, k - 1));
    MatD ker = to_double(sys.kernel_coords(w, k - 1));
    if (ker.cols() > 0) {
      MatD g = a.gram_num(sys, w, k);
      MatD block = (dkm * ker).transpose() * g * r;
      rows += block.rows();
      blocks.push_back(std::move(block));
    }
  }
  MatD out(rows, static_cast<Eigen::Index>(sys.space_dim(ci, k)));
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return out;
}

}  // namespace

bool a_harmonic_check(const ElementSystem& sys, const CellProducts& a, int ci,
                      int k, const CellForm& u)
{
  VecQ x = sys.coords_of(ci, k, u);
  MatQ rows = harmonicity_rows(sys, a, ci, k, ci);
  VecQ res = rows * x;
  for (Eigen::Index i = 0; i < res.size(); ++i)
    if (res(i) != 0) return false;
  return true;
}

VecQ harmonic_extension(const ElementSystem& sys, const CellProducts& a,
                        int ci, int k, const std::map<int, VecQ>& boundary)
{
  const Complex& cx = sys.complex();
  if (!check_exactness_boundary(sys, ci))
    throw SequenceInexact("boundary-condition sequence not exact on " + cx.cell(ci).id);
  if (k >= cx.cell(ci).dim)
    throw DegreeMismatch("harmonic_extension expects k < dim T");
  std::vector<MatQ> blocks;
  std::vector<VecQ> rhss;
  Eigen::Index rows = 0;
  for (int bc : cx.cell(ci).boundary) {
    MatQ r = sys.restriction(ci, bc, k);
    if (r.rows() == 0) continue;
    auto it = boundary.find(bc);
    VecQ rhs = (it != boundary.end()) ? it->second : VecQ(VecQ::Zero(r.rows()));
    if (rhs.size() != r.rows())
      throw NotExtendable("boundary coordinate length mismatch");
    rows += r.rows();
    blocks.push_back(std::move(r));
    rhss.push_back(std::move(rhs));
  }
  MatQ horto = harmonicity_rows(sys, a, ci, k, ci);
  MatQ mat(rows + horto.rows(), sys.space_dim(ci, k));
  VecQ rhs = VecQ::Zero(rows + horto.rows());
  Eigen::Index at = 0;
  for (size_t i = 0; i < blocks.size(); ++i) {
    mat.middleRows(at, blocks[i].rows()) = blocks[i];
    rhs.segment(at, rhss[i].size()) = rhss[i];
    at += blocks[i].rows();
  }
  mat.middleRows(at, horto.rows()) = horto;
  try {
    return solve(mat, rhs, true);
  } catch (const InconsistentSystem&) {
    throw NotExtendable("boundary data has no A-harmonic extension on " +
                        cx.cell(ci).id);
  }
}

VecQ harmonic_top_form(const ElementSystem& sys, const CellProducts& a,
                       int ci, const Rational& alpha)
{
  const Complex& cx = sys.complex();
  if (!check_exactness_boundary(sys, ci))
    throw SequenceInexact("boundary-condition sequence not exact on " + cx.cell(ci).id);
  const int m = cx.cell(ci).dim;
  RowVecQ integral(sys.space_dim(ci, m));
  for (Eigen::Index j = 0; j < integral.size(); ++j)
    integral(j) =
        integrate_cell(cx, ci, sys.basis(ci, m)[static_cast<size_t>(j)]);
  MatQ horto = harmonicity_rows(sys, a, ci, m, ci);
  MatQ mat(1 + horto.rows(), sys.space_dim(ci, m));
  mat.row(0) = integral;
  mat.bottomRows(horto.rows()) = horto;
  VecQ rhs = VecQ::Zero(1 + horto.rows());
  rhs(0) = alpha;
  return solve(mat, rhs, true);
}

ElementSystem locally_harmonic_subsystem(const ElementSystem& parent,
                                         const CellProducts& a, int threads)
{
  const Complex& cx = parent.complex();
  {
    CompatibilityReport report = compatibility(parent);
    if (!report.compatible)
      throw ParentNotCompatible("parent system is not compatible: " +
                                report.first_failure);
  }
  ElementSystem sub(cx);
  const int n = cx.num_cells();
  std::vector<std::map<int, std::vector<CellForm>>> results(
      static_cast<size_t>(n));
  auto work = [&](int begin, int end) {
    for (int ci = begin; ci < end; ++ci) {
      const int m = cx.cell(ci).dim;
      for (int k = 0; k <= m; ++k) {
        if (parent.space_dim(ci, k) == 0) continue;
        std::vector<MatQ> blocks;
        Eigen::Index rows = 0;
        for (int w : cx.subcells(ci)) {
          if (k > cx.cell(w).dim) continue;
          MatQ block = harmonicity_rows(parent, a, ci, k, w);
          rows += block.rows();
          blocks.push_back(std::move(block));
        }
        MatQ mat(rows, parent.space_dim(ci, k));
        Eigen::Index at = 0;
        for (const auto& b : blocks) {
          mat.middleRows(at, b.rows()) = b;
          at += b.rows();
        }
        MatQ ker = (rows == 0) ? MatQ::Identity(parent.space_dim(ci, k),
                                                parent.space_dim(ci, k))
                               : nullspace(mat);
        std::vector<CellForm> basis;
        for (Eigen::Index j = 0; j < ker.cols(); ++j)
          basis.push_back(parent.from_coords(ci, k, VecQ(ker.col(j))));
        results[static_cast<size_t>(ci)][k] = std::move(basis);
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
  for (int ci = 0; ci < n; ++ci)
    for (auto& [k, basis] : results[static_cast<size_t>(ci)])
      sub.set_basis(ci, k, std::move(basis));
  sub.verify_closure();
  return sub;
}

std::map<std::pair<int, int>, MatD> locally_harmonic_coords_num(
    const ElementSystem& parent, const CellProducts& a)
{
  const Complex& cx = parent.complex();
  std::map<std::pair<int, int>, MatD> out;
  for (int ci = 0; ci < cx.num_cells(); ++ci) {
    const int m = cx.cell(ci).dim;
    for (int k = 0; k <= m; ++k) {
      if (parent.space_dim(ci, k) == 0) continue;
      std::vector<MatD> blocks;
      Eigen::Index rows = 0;
      for (int w : cx.subcells(ci)) {
        if (k > cx.cell(w).dim) continue;
        MatD block = harmonicity_rows_num(parent, a, ci, k, w);
        rows += block.rows();
        blocks.push_back(std::move(block));
      }
      const Eigen::Index cols =
          static_cast<Eigen::Index>(parent.space_dim(ci, k));
      MatD mat(rows, cols);
      Eigen::Index at = 0;
      for (const auto& b : blocks) {
        mat.middleRows(at, b.rows()) = b;
        at += b.rows();
      }
      if (rows == 0) {
        out[{ci, k}] = MatD::Identity(cols, cols);
        continue;
      }
      // Null space with the documented 1e-10 singularity threshold.
      Eigen::JacobiSVD<MatD> svd(mat, Eigen::ComputeFullV);
      double smax =
          svd.singularValues().size() > 0 ? svd.singularValues()(0) : 1.0;
      double tol = 1e-10 * std::max(smax, 1.0);
      Eigen::Index r = 0;
      for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > tol) ++r;
      out[{ci, k}] = svd.matrixV().rightCols(cols - r);
    }
  }
  return out;
}

GlobalSpace canonical_harmonic_basis(const ElementSystem& harmonic, int k)
{
  const Complex& cx = harmonic.complex();
  GlobalSpace gs = global_space(harmonic, cx.all_cells(), k);
  MatQ rho = de_rham_matrix(harmonic, gs);
  if (rho.rows() != rho.cols())
    throw NotCompatible("De Rham matrix is not square on the subsystem");
  MatQ rho_inv = inverse(rho);
  GlobalSpace out;
  out.degree = k;
  out.cells = gs.cells;
  std::vector<int> kcells;
  for (int ci : gs.cells)
    if (cx.cell(ci).dim == k) kcells.push_back(ci);
  for (size_t c = 0; c < kcells.size(); ++c) {
    std::map<int, VecQ> fam;
    for (int ci : gs.cells) {
      VecQ coords = VecQ::Zero(harmonic.space_dim(ci, k));
      bool nonzero = false;
      for (Eigen::Index i = 0; i < gs.dim(); ++i) {
        const Rational& w = rho_inv(i, static_cast<Eigen::Index>(c));
        if (w == 0) continue;
        auto it = gs.families[static_cast<size_t>(i)].find(ci);
        if (it == gs.families[static_cast<size_t>(i)].end()) continue;
        coords += w * it->second;
        nonzero = true;
      }
      if (nonzero) fam[ci] = coords;
    }
    out.families.push_back(std::move(fam));
    out.labels.push_back(cx.cell(kcells[c]).id);
  }
  return out;
}

double subspace_angle(const MatD& a, const MatD& b)
{
  if (a.cols() == 0 || b.cols() == 0) return 0.0;
  auto orth = [](const MatD& m) {
    Eigen::HouseholderQR<MatD> qr(m);
    return MatD(qr.householderQ() * MatD::Identity(m.rows(), m.cols()));
  };
  MatD qa = orth(a), qb = orth(b);
  Eigen::JacobiSVD<MatD> svd(qa.transpose() * qb);
  double smin = svd.singularValues().minCoeff();
  smin = std::clamp(smin, -1.0, 1.0);
  return std::acos(smin);
}

}  // namespace fes
