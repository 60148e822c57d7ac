#include "fes/smoothing.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

namespace fes {

namespace {

// int_0^1 r^n (1 - r^2)^s dr, exact.
Rational radial_integral(int n, int s)
{
  Rational total(0);
  for (int t = 0; t <= s; ++t) {
    Rational term = binomial(s, t) / Rational(n + 2 * t + 1);
    total += (t % 2 == 0) ? term : -term;
  }
  return total;
}

double sphere_measure(int d)
{
  switch (d) {
    case 1:
      return 2.0;  // S^0
    case 2:
      return 2.0 * M_PI;
    case 3:
      return 4.0 * M_PI;
    default:
      throw std::invalid_argument("kernel dimension 1..3");
  }
}

}  // namespace

double Kernel::radial(double r) const
{
  if (r >= 1.0) return 0.0;
  double r2 = r * r;
  double poly = 0.0;
  for (size_t j = coeffs_.size(); j-- > 0;)
    poly = poly * r2 + coeffs_[j].get_d();
  return norm_ * poly * std::pow(1.0 - r2, bump_);
}

double Kernel::operator()(const VecD& y) const { return radial(y.norm()); }

Kernel make_kernel(int p, int d)
{
  if (p < 0 || d < 1 || d > 3)
    throw std::invalid_argument("make_kernel: p >= 0 and 1 <= d <= 3");
  Kernel psi;
  psi.dim_ = d;
  psi.degree_ = p;
  const int moments = (p + d) / 2;  // vanishing even radial moments 1..J
  const int n = moments + 1;
  // unknowns: c_j, j = 0..J; conditions:
  //   sum_j c_j I(2j + 2i + d - 1) = delta_{i0} / sphere
  // solved exactly with the sphere factor normalized to one.
  MatQ mat(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      mat(i, j) = radial_integral(2 * j + 2 * i + d - 1, psi.bump_);
  VecQ rhs = VecQ::Zero(n);
  rhs(0) = 1;
  VecQ c;
  try {
    c = solve(mat, rhs, true);
  } catch (const SingularMatrix&) {
    throw IllConditionedMoments("moment system is singular");
  }
  // crude conditioning guard on the float image of the moment matrix
  {
    Eigen::JacobiSVD<MatD> svd(to_double(mat));
    double cond = svd.singularValues()(0) /
                  svd.singularValues()(svd.singularValues().size() - 1);
    if (!(cond < 1e12))
      throw IllConditionedMoments("moment system condition " +
                                  std::to_string(cond));
  }
  psi.coeffs_.assign(c.data(), c.data() + n);
  psi.norm_ = 1.0 / sphere_measure(d);
  return psi;
}

double kernel_moment_residual(const Kernel& psi, int max_degree)
{
  BallRule rule = default_ball_rule(psi);
  const int d = psi.dim();
  // enumerate exponent vectors of total degree <= max_degree
  std::vector<std::vector<int>> monos;
  std::vector<int> cur(static_cast<size_t>(d), 0);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == d) {
      monos.push_back(cur);
      return;
    }
    for (int e = 0; e <= left; ++e) {
      cur[static_cast<size_t>(pos)] = e;
      rec(pos + 1, left - e);
    }
    cur[static_cast<size_t>(pos)] = 0;
  };
  rec(0, max_degree);
  double worst = 0.0;
  for (const auto& alpha : monos) {
    double total = 0.0;
    for (Eigen::Index q = 0; q < rule.size(); ++q) {
      VecD y = rule.points.col(q);
      double mono = 1.0;
      for (int i = 0; i < d; ++i)
        for (int e = 0; e < alpha[static_cast<size_t>(i)]; ++e) mono *= y(i);
      total += rule.weights(q) * psi(y) * mono;
    }
    bool is_zero_exp = true;
    for (int e : alpha)
      if (e != 0) is_zero_exp = false;
    worst = std::max(worst, std::abs(total - (is_zero_exp ? 1.0 : 0.0)));
  }
  return worst;
}

BallRule ball_rule(int d, int radial_points, int angular_points)
{
  QuadRule r = gauss_legendre(radial_points);  // on [0, 1]
  BallRule rule;
  if (d == 1) {
    rule.points = MatD(1, 2 * radial_points);
    rule.weights = VecD(2 * radial_points);
    for (int i = 0; i < radial_points; ++i) {
      rule.points(0, 2 * i) = r.points(0, i);
      rule.weights(2 * i) = r.weights(i);
      rule.points(0, 2 * i + 1) = -r.points(0, i);
      rule.weights(2 * i + 1) = r.weights(i);
    }
    return rule;
  }
  if (d == 2) {
    const int n = radial_points * angular_points;
    rule.points = MatD(2, n);
    rule.weights = VecD(n);
    Eigen::Index at = 0;
    for (int i = 0; i < radial_points; ++i)
      for (int a = 0; a < angular_points; ++a) {
        double rr = r.points(0, i);
        double th = 2.0 * M_PI * a / angular_points;
        rule.points(0, at) = rr * std::cos(th);
        rule.points(1, at) = rr * std::sin(th);
        rule.weights(at) = r.weights(i) * rr * (2.0 * M_PI / angular_points);
        ++at;
      }
    return rule;
  }
  // d == 3: r-Gauss x Gauss in cos(theta) x uniform phi
  QuadRule ct = gauss_legendre(angular_points);  // on [0,1] -> map to [-1,1]
  const int nphi = 2 * angular_points;
  const int n = radial_points * angular_points * nphi;
  rule.points = MatD(3, n);
  rule.weights = VecD(n);
  Eigen::Index at = 0;
  for (int i = 0; i < radial_points; ++i)
    for (int j = 0; j < angular_points; ++j)
      for (int a = 0; a < nphi; ++a) {
        double rr = r.points(0, i);
        double c = 2.0 * ct.points(0, j) - 1.0;
        double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        double phi = 2.0 * M_PI * a / nphi;
        rule.points(0, at) = rr * s * std::cos(phi);
        rule.points(1, at) = rr * s * std::sin(phi);
        rule.points(2, at) = rr * c;
        rule.weights(at) = r.weights(i) * rr * rr * (2.0 * ct.weights(j)) *
                           (2.0 * M_PI / nphi);
        ++at;
      }
  return rule;
}

BallRule default_ball_rule(const Kernel& psi)
{
  // enough points for the kernel polynomial times degree p + d + 4
  int deg = 2 * static_cast<int>(psi.coefficients().size()) +
            2 * psi.bump_power() + psi.preserved_degree() + psi.dim() + 6;
  int radial = deg / 2 + 2;
  int angular = deg + 4;
  return ball_rule(psi.dim(), radial, angular);
}

SampledForm SampledForm::from_poly(const PolyForm& u, VecD lo, VecD hi)
{
  SampledForm out;
  out.dim = u.dim();
  out.degree = u.degree();
  out.box_lo = std::move(lo);
  out.box_hi = std::move(hi);
  PolyForm du = d(u);
  out.coeff = [u](AltMask mask, const VecD& x) {
    auto vals = u.evaluate(x);
    auto it = vals.find(mask);
    return it == vals.end() ? 0.0 : it->second;
  };
  out.d_coeff = [du](AltMask mask, const VecD& x) {
    auto vals = du.evaluate(x);
    auto it = vals.find(mask);
    return it == vals.end() ? 0.0 : it->second;
  };
  return out;
}

VecD ScaleField::gradient(const VecD& x) const
{
  if (grad) return grad(x);
  const double h = 1e-6;
  VecD g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VecD a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (phi(a) - phi(b)) / (2 * h);
  }
  return g;
}

ScaleField ScaleField::constant(int d, double value)
{
  ScaleField out;
  out.phi = [value](const VecD&) { return value; };
  out.grad = [d](const VecD&) { return VecD(VecD::Zero(d)); };
  return out;
}

namespace {

void increasing_subsets_d(int n, int k, std::vector<std::vector<int>>& out)
{
  std::vector<int> cur(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) cur[static_cast<size_t>(i)] = i;
  if (k > n) return;
  if (k == 0) {
    out.push_back({});
    return;
  }
  while (true) {
    out.push_back(cur);
    int i = k - 1;
    while (i >= 0 && cur[static_cast<size_t>(i)] == n - k + i) --i;
    if (i < 0) break;
    ++cur[static_cast<size_t>(i)];
    for (int j = i + 1; j < k; ++j)
      cur[static_cast<size_t>(j)] = cur[static_cast<size_t>(j - 1)] + 1;
  }
}

double minor_det_dense(const MatD& m, const std::vector<int>& rows,
                       const std::vector<int>& cols)
{
  const size_t k = rows.size();
  if (k == 0) return 1.0;
  if (k == 1) return m(rows[0], cols[0]);
  if (k == 2)
    return m(rows[0], cols[0]) * m(rows[1], cols[1]) -
           m(rows[0], cols[1]) * m(rows[1], cols[0]);
  Eigen::Matrix3d sub;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      sub(a, b) = m(rows[static_cast<size_t>(a)], cols[static_cast<size_t>(b)]);
  return sub.determinant();
}

}  // namespace

std::map<AltMask, double> regularize(const SampledForm& u,
                                     const ScaleField& scale, double eps,
                                     const Kernel& psi, const VecD& x,
                                     const BallRule& rule)
{
  const int d = u.dim;
  const double ephi = eps * scale.phi(x);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) - std::abs(ephi) < u.box_lo(i) ||
        x(i) + std::abs(ephi) > u.box_hi(i))
      throw DomainExceeded("regularization ball leaves the form's domain");
  VecD gphi = scale.gradient(x);

  std::vector<std::vector<int>> masks;
  increasing_subsets_d(d, u.degree, masks);
  std::map<AltMask, double> out;
  for (const auto& idx : masks) out[mask_from_indices(idx)] = 0.0;

  for (Eigen::Index q = 0; q < rule.size(); ++q) {
    VecD y = rule.points.col(q);
    double w = rule.weights(q) * psi(y);
    if (w == 0.0) continue;
    VecD z = x + ephi * y;
    // D Phi_y(x) = Id + eps (grad phi . xi) y
    MatD dphi = MatD::Identity(d, d);
    for (int col = 0; col < d; ++col)
      for (int row = 0; row < d; ++row)
        dphi(row, col) += eps * gphi(col) * y(row);
    for (const auto& icols : masks) {
      double acc = 0.0;
      for (const auto& jrows : masks) {
        double uj = u.coeff(mask_from_indices(jrows), z);
        if (uj == 0.0) continue;
        acc += uj * minor_det_dense(dphi, jrows, icols);
      }
      out[mask_from_indices(icols)] += w * acc;
    }
  }
  return out;
}

double commutation_residual(const SampledForm& u, const ScaleField& scale,
                            double eps, const Kernel& psi,
                            const std::vector<VecD>& points, double fd_step,
                            const BallRule& rule)
{
  if (!u.d_coeff)
    throw std::invalid_argument("commutation_residual needs an analytic d");
  const int d = u.dim;
  SampledForm du;
  du.dim = d;
  du.degree = u.degree + 1;
  du.coeff = u.d_coeff;
  du.box_lo = u.box_lo;
  du.box_hi = u.box_hi;

  std::vector<std::vector<int>> kmasks, k1masks;
  increasing_subsets_d(d, u.degree, kmasks);
  increasing_subsets_d(d, u.degree + 1, k1masks);

  double residual = 0.0;
  for (const VecD& x : points) {
    auto rdu = regularize(du, scale, eps, psi, x, rule);
    for (const auto& kidx : k1masks) {
      AltMask kmask = mask_from_indices(kidx);
      // (d Ru)_K = sum_{j in K} sign * d/dx_j (Ru)_{K minus j}
      double val = 0.0;
      for (size_t pos = 0; pos < kidx.size(); ++pos) {
        int j = kidx[pos];
        AltMask rest = kmask & ~(AltMask(1) << j);
        VecD xp = x, xm = x;
        xp(j) += fd_step;
        xm(j) -= fd_step;
        auto up = regularize(u, scale, eps, psi, xp, rule);
        auto um = regularize(u, scale, eps, psi, xm, rule);
        double der = (up.at(rest) - um.at(rest)) / (2 * fd_step);
        val += (pos % 2 == 0 ? 1.0 : -1.0) * der;
      }
      residual = std::max(residual, std::abs(val - rdu.at(kmask)));
    }
  }
  return residual;
}

ScaleField mesh_scale_field(const Complex& cx, double* c1, double* c2)
{
  const int d = cx.dim();
  // piecewise diameter of top cells, with barycentric point location
  struct TopCell {
    MatD verts;
    MatD to_bary;  // solves for barycentric coordinates
    VecD base;
    double diameter;
    VecD centroid;
  };
  auto cells = std::make_shared<std::vector<TopCell>>();
  for (int ci : cx.cells_of_dim(d)) {
    for (const auto& [s, sgn] : cx.cell(ci).support) {
      TopCell tc;
      tc.verts = to_double(cx.simplex_vertex_matrix(s));
      MatD edges(d, d);
      for (int j = 0; j < d; ++j)
        edges.col(j) = tc.verts.col(j + 1) - tc.verts.col(0);
      tc.to_bary = edges.inverse();
      tc.base = tc.verts.col(0);
      tc.diameter = 0;
      for (int a = 0; a <= d; ++a)
        for (int b = a + 1; b <= d; ++b)
          tc.diameter =
              std::max(tc.diameter, (tc.verts.col(a) - tc.verts.col(b)).norm());
      tc.centroid = tc.verts.rowwise().mean();
      cells->push_back(std::move(tc));
    }
  }
  auto diameter_at = [cells, d](const VecD& x) {
    double best = -1;
    double best_dist = 0;
    for (const auto& tc : *cells) {
      VecD t = tc.to_bary * (x - tc.base);
      double lam0 = 1.0 - t.sum();
      double worst = std::min(lam0, t.minCoeff());
      if (worst >= -1e-12) return tc.diameter;
      double dist = (x - tc.centroid).norm();
      if (best < 0 || dist < best_dist) {
        best = tc.diameter;
        best_dist = dist;
      }
    }
    return best;  // nearest cell outside the domain
  };
  double hmin = 1e300;
  for (const auto& tc : *cells) hmin = std::min(hmin, tc.diameter);
  const double delta = hmin / 2.0;
  Kernel psi = make_kernel(1, d);
  BallRule rule = ball_rule(d, 8, 16);

  ScaleField out;
  out.phi = [diameter_at, delta, psi, rule](const VecD& x) {
    double acc = 0.0;
    for (Eigen::Index q = 0; q < rule.size(); ++q) {
      VecD y = rule.points.col(q);
      acc += rule.weights(q) * psi(y) * diameter_at(x - delta * y);
    }
    return acc;
  };
  if (c1 || c2) {
    double lo = 1e300, hi = 0;
    for (const auto& tc : *cells) {
      // sample at the centroid and the vertex midpoints
      std::vector<VecD> samples{tc.centroid};
      for (int a = 0; a <= d; ++a)
        samples.push_back(0.5 * (tc.verts.col(a) + tc.centroid));
      for (const VecD& x : samples) {
        double ratio = out.phi(x) / tc.diameter;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
    }
    if (c1) *c1 = lo;
    if (c2) *c2 = hi;
  }
  return out;
}

}  // namespace fes

namespace fes {

std::map<std::string, bool> epsilon_locality_report(const Complex& cx,
                                                    const ScaleField& scale,
                                                    double eps)
{
  const int d = cx.dim();
  struct Tri {
    int cell;
    MatD verts;
    MatD to_bary;
    VecD base;
  };
  std::vector<Tri> tris;
  for (int ci : cx.cells_of_dim(d))
    for (const auto& [s, sgn] : cx.cell(ci).support) {
      Tri t;
      t.cell = ci;
      t.verts = to_double(cx.simplex_vertex_matrix(s));
      MatD edges(d, d);
      for (int j = 0; j < d; ++j)
        edges.col(j) = t.verts.col(j + 1) - t.verts.col(0);
      t.to_bary = edges.inverse();
      t.base = t.verts.col(0);
      tris.push_back(std::move(t));
    }
  auto cell_at = [&](const VecD& x) {
    for (const auto& t : tris) {
      VecD lam = t.to_bary * (x - t.base);
      double lam0 = 1.0 - lam.sum();
      if (std::min(lam0, lam.minCoeff()) >= -1e-9) return t.cell;
    }
    return -1;
  };
  // "touching": the two top cells share a subcell
  auto touches = [&](int a, int b) {
    if (a == b) return true;
    for (int w : cx.subcells(a))
      if (cx.is_subcell(w, b)) return true;
    return false;
  };
  std::map<std::string, bool> out;
  const int probes = 8;
  for (int ci : cx.cells_of_dim(d)) {
    bool ok = true;
    for (const auto& [s, sgn] : cx.cell(ci).support) {
      MatD verts = to_double(cx.simplex_vertex_matrix(s));
      std::vector<VecD> samples;
      samples.push_back(verts.rowwise().mean());
      for (int a = 0; a <= d; ++a)
        samples.push_back(0.5 * (verts.col(a) + verts.rowwise().mean()));
      for (const VecD& x : samples) {
        double radius = eps * scale.phi(x);
        for (int pdir = 0; pdir < probes; ++pdir) {
          VecD dir = VecD::Zero(d);
          if (d == 1) {
            dir(0) = (pdir % 2 == 0) ? 1.0 : -1.0;
          } else {
            double ang = 2.0 * M_PI * pdir / probes;
            dir(0) = std::cos(ang);
            dir(1) = std::sin(ang);
          }
          VecD y = x + radius * dir;
          int there = cell_at(y);
          if (there >= 0 && !touches(ci, there)) ok = false;
        }
      }
    }
    out[cx.cell(ci).id] = ok;
  }
  return out;
}

}  // namespace fes
