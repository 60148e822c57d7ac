#include "fes/assembly.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "fes/harmonic.hpp"

namespace fes {

MatD assemble_mass(const ElementSystem& sys, const GlobalSpace& gs)
{
  const Complex& cx = sys.complex();
  const int d = cx.dim();
  CellProducts l2 = CellProducts::euclidean(cx);
  // families touching each top cell
  std::map<int, std::vector<Eigen::Index>> touching;
  for (Eigen::Index j = 0; j < gs.dim(); ++j)
    for (const auto& [ci, coords] : gs.families[static_cast<size_t>(j)])
      if (cx.cell(ci).dim == d) touching[ci].push_back(j);
  MatD mass = MatD::Zero(gs.dim(), gs.dim());
  for (const auto& [ci, fams] : touching) {
    MatQ gram = l2.gram(sys, ci, gs.degree);
    for (size_t a = 0; a < fams.size(); ++a)
      for (size_t b = a; b < fams.size(); ++b) {
        const VecQ& ca = gs.families[static_cast<size_t>(fams[a])].at(ci);
        const VecQ& cb = gs.families[static_cast<size_t>(fams[b])].at(ci);
        Rational v = (ca.transpose() * gram * cb)(0, 0);
        double dv = v.get_d();
        mass(fams[a], fams[b]) += dv;
        if (a != b) mass(fams[b], fams[a]) += dv;
      }
  }
  return mass;
}

AssembledPair assemble(const ElementSystem& sys, const MirrorSystem& mirrors,
                       int k)
{
  const Complex& cx = sys.complex();
  AssembledPair pair;
  pair.degree = k;
  pair.space = dof_dual_global_space(mirrors, sys, k);
  pair.space_up = dof_dual_global_space(mirrors, sys, k + 1);
  // D_k: coordinates of d(fam_j) in the dual basis = its mirror values.
  pair.d = MatQ::Zero(pair.space_up.dim(), pair.space.dim());
  // enumerate (cell, mirror index) in the dual basis order
  std::vector<std::pair<int, size_t>> rows;
  for (int ci : pair.space_up.cells)
    for (size_t i = 0; i < mirrors.mirrors(ci, k + 1).size(); ++i)
      rows.push_back({ci, i});
  for (Eigen::Index j = 0; j < pair.space.dim(); ++j) {
    // d of the family, cell by cell (sparse)
    std::map<int, VecQ> image;
    for (const auto& [ci, coords] : pair.space.families[static_cast<size_t>(j)]) {
      VecQ dc = sys.cell_d(ci, k) * coords;
      bool nonzero = false;
      for (Eigen::Index i = 0; i < dc.size(); ++i)
        if (dc(i) != 0) nonzero = true;
      if (nonzero) image[ci] = dc;
    }
    for (size_t r = 0; r < rows.size(); ++r) {
      auto [ci, idx] = rows[r];
      auto it = image.find(ci);
      if (it == image.end()) continue;
      CellForm du = sys.from_coords(ci, k + 1, it->second);
      pair.d(static_cast<Eigen::Index>(r), j) =
          mirrors.evaluate(cx, mirrors.mirrors(ci, k + 1)[idx], du);
    }
  }
  pair.mass = assemble_mass(sys, pair.space);
  pair.mass_up = assemble_mass(sys, pair.space_up);
  return pair;
}

AssembledPair assemble_generic(const ElementSystem& sys, int k)
{
  const Complex& cx = sys.complex();
  AssembledPair pair;
  pair.degree = k;
  pair.space = global_space(sys, cx.all_cells(), k);
  pair.space_up = global_space(sys, cx.all_cells(), k + 1);
  pair.d = global_d_matrix(sys, pair.space, pair.space_up);
  pair.mass = assemble_mass(sys, pair.space);
  pair.mass_up = assemble_mass(sys, pair.space_up);
  return pair;
}

EigenResult hodge_eigenvalues(const AssembledPair& pair, int count)
{
  EigenResult out;
  out.dim = pair.mass.rows();
  if (out.dim == 0) return out;
  MatD k = pair.stiffness();
  Eigen::GeneralizedSelfAdjointEigenSolver<MatD> solver(k, pair.mass);
  if (solver.info() != Eigen::Success)
    throw SolverBreakdown("generalized eigensolver failed");
  VecD evs = solver.eigenvalues();
  double largest = std::max(std::abs(evs(evs.size() - 1)), 1.0);
  double threshold = 1e-8 * largest;
  for (Eigen::Index i = 0; i < evs.size(); ++i) {
    if (std::abs(evs(i)) <= threshold) {
      ++out.zero_modes;
      continue;
    }
    if (static_cast<int>(out.eigenvalues.size()) < count)
      out.eigenvalues.push_back(evs(i));
  }
  if (count > static_cast<int>(out.dim)) out.count_clamped = true;
  return out;
}

int exact_betti(const AssembledPair& below, const AssembledPair& at)
{
  Eigen::Index nk = at.space.dim();
  Eigen::Index rk = rank(at.d);
  Eigen::Index rkm = rank(below.d);
  return static_cast<int>(nk - rk - rkm);
}

int full_hodge_zero_modes(const AssembledPair& below, const AssembledPair& at)
{
  // L = K_k + M_k D_{k-1} M_{k-1}^{-1} D_{k-1}^T M_k
  MatD dkm = to_double(below.d);
  MatD l = at.stiffness();
  if (dkm.cols() > 0) {
    MatD minv = below.mass.inverse();
    l += at.mass * dkm * minv * dkm.transpose() * at.mass;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<MatD> solver(l, at.mass);
  if (solver.info() != Eigen::Success)
    throw SolverBreakdown("full Hodge Laplacian eigensolver failed");
  VecD evs = solver.eigenvalues();
  double largest = std::max(std::abs(evs(evs.size() - 1)), 1.0);
  int zero = 0;
  for (Eigen::Index i = 0; i < evs.size(); ++i)
    if (std::abs(evs(i)) <= 1e-8 * largest) ++zero;
  return zero;
}

void write_matrix_triplets(const std::string& path, const MatD& m,
                           const std::string& name)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  char buf[64];
  out << "# {\"name\": \"" << name << "\", \"rows\": " << m.rows()
      << ", \"cols\": " << m.cols() << "}\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) == 0.0) continue;
      std::snprintf(buf, sizeof(buf), "%.12g", m(i, j));
      out << i << " " << j << " " << buf << "\n";
    }
}

DiagramReport commuting_diagram_report(const ElementSystem& sys,
                                       const MirrorSystem& mirrors,
                                       const ElementSystem& host)
{
  const Complex& cx = sys.complex();
  DiagramReport report;
  // deterministic sample of host global forms per degree
  std::vector<GlobalSpace> host_spaces, sys_spaces;
  for (int k = 0; k <= cx.dim(); ++k) {
    host_spaces.push_back(global_space(host, cx.all_cells(), k));
    sys_spaces.push_back(global_space(sys, cx.all_cells(), k));
  }
  // interpolation matrices host -> sys per degree
  std::vector<MatQ> imats;
  for (int k = 0; k <= cx.dim(); ++k) {
    const GlobalSpace& hs = host_spaces[static_cast<size_t>(k)];
    MatQ im(sys_spaces[static_cast<size_t>(k)].dim(), hs.dim());
    for (Eigen::Index j = 0; j < hs.dim(); ++j) {
      std::map<int, CellForm> fam;
      for (int ci = 0; ci < cx.num_cells(); ++ci)
        fam[ci] = hs.family_on(host, j, ci);
      auto iu = interpolate(mirrors, sys, fam, k);
      std::map<int, VecQ> coords;
      for (const auto& [ci, c] : iu) coords[ci] = c;
      im.col(j) =
          global_coords_of(sys, sys_spaces[static_cast<size_t>(k)], coords);
    }
    imats.push_back(std::move(im));
  }
  // dI = Id as exact matrices
  report.d_commutes = true;
  for (int k = 0; k + 1 <= cx.dim(); ++k) {
    MatQ dh = global_d_matrix(host, host_spaces[static_cast<size_t>(k)],
                              host_spaces[static_cast<size_t>(k + 1)]);
    MatQ ds = global_d_matrix(sys, sys_spaces[static_cast<size_t>(k)],
                              sys_spaces[static_cast<size_t>(k + 1)]);
    MatQ lhs = ds * imats[static_cast<size_t>(k)];
    MatQ rhs = imats[static_cast<size_t>(k + 1)] * dh;
    if (lhs != rhs) {
      report.d_commutes = false;
      report.detail = "dI != Id at k=" + std::to_string(k);
    }
  }
  // rho I = rho
  report.integrals_preserved = true;
  for (int k = 0; k <= cx.dim(); ++k) {
    MatQ rho_host = de_rham_matrix(host, host_spaces[static_cast<size_t>(k)]);
    MatQ rho_sys = de_rham_matrix(sys, sys_spaces[static_cast<size_t>(k)]);
    MatQ lhs = rho_sys * imats[static_cast<size_t>(k)];
    if (lhs != rho_host) {
      report.integrals_preserved = false;
      if (report.detail.empty())
        report.detail = "rho I != rho at k=" + std::to_string(k);
    }
  }
  // induced isomorphisms on cohomology
  report.cohomology_isomorphism = true;
  for (int k = 0; k <= cx.dim(); ++k) {
    const Eigen::Index nh = host_spaces[static_cast<size_t>(k)].dim();
    const Eigen::Index ns = sys_spaces[static_cast<size_t>(k)].dim();
    MatQ dh_k = (k < cx.dim())
                    ? global_d_matrix(host, host_spaces[static_cast<size_t>(k)],
                                      host_spaces[static_cast<size_t>(k + 1)])
                    : MatQ::Zero(0, nh);
    MatQ ds_k = (k < cx.dim())
                    ? global_d_matrix(sys, sys_spaces[static_cast<size_t>(k)],
                                      sys_spaces[static_cast<size_t>(k + 1)])
                    : MatQ::Zero(0, ns);
    MatQ dh_km =
        (k > 0) ? global_d_matrix(host, host_spaces[static_cast<size_t>(k - 1)],
                                  host_spaces[static_cast<size_t>(k)])
                : MatQ::Zero(nh, 0);
    MatQ ds_km =
        (k > 0) ? global_d_matrix(sys, sys_spaces[static_cast<size_t>(k - 1)],
                                  sys_spaces[static_cast<size_t>(k)])
                : MatQ::Zero(ns, 0);
    MatQ kerh = nullspace(dh_k);
    MatQ image = imats[static_cast<size_t>(k)] * kerh;
    MatQ joint(ns, image.cols() + ds_km.cols());
    joint.leftCols(image.cols()) = image;
    joint.rightCols(ds_km.cols()) = ds_km;
    Eigen::Index r_joint = rank(joint);
    Eigen::Index dim_ker_s = ns - rank(ds_k);
    bool onto = r_joint == dim_ker_s;
    Eigen::Index preimage = image.cols() - r_joint + rank(ds_km);
    bool injective = preimage == rank(dh_km);
    if (!onto || !injective) {
      report.cohomology_isomorphism = false;
      if (report.detail.empty())
        report.detail = "cohomology map fails at k=" + std::to_string(k);
    }
  }
  return report;
}

}  // namespace fes
