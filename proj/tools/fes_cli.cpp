// Command-line surface: mesh ingestion, system construction, verification
// reports, basis and DOF export, dual meshes, eigenvalue tables and
// smoothing diagnostics.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "fes/assembly.hpp"
#include "fes/harmonic.hpp"
#include "fes/meshio.hpp"
#include "fes/mirror.hpp"
#include "fes/smoothing.hpp"
#include "fes/tensor.hpp"

using namespace fes;
using nlohmann::ordered_json;

namespace {

// Exit codes: 0 verified, 1 domain failure, 2 usage / parse failure.
constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kUsage = 2;

std::string fmt12(double x)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

void emit(const ordered_json& j, const std::string& out_path)
{
  std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path);
    out << text;
  }
}

MeshFile load_mesh(const std::string& path) { return read_mesh(path); }

MeshOrders resolve_orders(const MeshFile& mesh, int order,
                          const std::string& orders_path)
{
  if (!orders_path.empty()) return read_orders(orders_path);
  if (order > 0) {
    MeshOrders o;
    o.default_order = order;
    return o;
  }
  if (mesh.orders) return *mesh.orders;
  return MeshOrders{};
}

ordered_json form_to_json(const PolyForm& u)
{
  ordered_json j;
  j["deg"] = u.degree();
  ordered_json terms = ordered_json::array();
  for (const auto& [key, c] : u.terms()) {
    ordered_json t;
    t["alpha"] = key.mono;
    t["I"] = mask_indices(key.mask);
    t["coeff"] = c.get_str();
    terms.push_back(std::move(t));
  }
  j["terms"] = std::move(terms);
  return j;
}

ordered_json family_to_json(const Complex& cx, const ElementSystem& sys,
                            const GlobalSpace& gs, Eigen::Index f)
{
  ordered_json j;
  j["label"] = gs.labels.empty() ? ("g" + std::to_string(f))
                                 : gs.labels[static_cast<size_t>(f)];
  ordered_json cells = ordered_json::array();
  for (const auto& [ci, coords] : gs.families[static_cast<size_t>(f)]) {
    ordered_json c;
    c["cell"] = cx.cell(ci).id;
    CellForm form = sys.from_coords(ci, gs.degree, coords);
    ordered_json parts = ordered_json::array();
    for (const auto& [s, sgn] : cx.cell(ci).support) {
      ordered_json p;
      p["simplex"] = s;
      p["form"] = form_to_json(form.part(s));
      parts.push_back(std::move(p));
    }
    c["support_forms"] = std::move(parts);
    cells.push_back(std::move(c));
  }
  j["cells"] = std::move(cells);
  return j;
}

int cmd_check(const std::string& mesh_path, int order,
              const std::string& orders_path, int threads,
              const std::string& out_path)
{
  MeshFile mesh = load_mesh(mesh_path);
  MeshOrders orders = resolve_orders(mesh, order, orders_path);
  ElementSystem sys =
      (orders.system == "polynomial")
          ? polynomial_system(mesh.complex,
                              [&](int ci, int k) {
                                return std::max(
                                    orders.order_of(mesh.complex.cell(ci).id) -
                                        k,
                                    0);
                              })
          : trimmed_system(mesh.complex, orders);
  CompatibilityReport report = compatibility(sys, threads);
  if (out_path.empty()) {
    std::cout << report.to_json();
  } else {
    std::ofstream out(out_path);
    out << report.to_json();
  }
  return report.compatible ? kOk : kDomainFailure;
}

int cmd_betti(const std::string& mesh_path, const std::string& out_path)
{
  MeshFile mesh = load_mesh(mesh_path);
  ordered_json j;
  j["betti"] = mesh.complex.betti_numbers();
  emit(j, out_path);
  return kOk;
}

int cmd_basis(const std::string& mesh_path, int order,
              const std::string& orders_path, int k,
              const std::string& out_path)
{
  MeshFile mesh = load_mesh(mesh_path);
  MeshOrders orders = resolve_orders(mesh, order, orders_path);
  ElementSystem sys = trimmed_system(mesh.complex, orders);
  GlobalSpace gs = global_space(sys, mesh.complex.all_cells(), k);
  ordered_json j;
  j["k"] = k;
  j["dimension"] = static_cast<long>(gs.dim());
  ordered_json fams = ordered_json::array();
  for (Eigen::Index f = 0; f < gs.dim(); ++f)
    fams.push_back(family_to_json(mesh.complex, sys, gs, f));
  j["families"] = std::move(fams);
  // DOF table of the canonical mirrors, for downstream assembly
  j["dofs"] = ordered_json::parse(
      dof_table_json(canonical_trimmed_mirrors(mesh.complex,
                                               orders.default_order),
                     sys))["dofs"];
  emit(j, out_path);
  return kOk;
}

int cmd_dual(const std::string& mesh_path, int threads,
             const std::string& out_path)
{
  MeshFile mesh = load_mesh(mesh_path);
  auto dual = mesh.complex.dual_complex();
  const Complex& dc = dual.complex;
  std::string mesh_out = out_path.empty() ? "dual.json" : out_path;
  write_mesh(dc, mesh_out);

  ElementSystem parent = trimmed_system(dc, 1);
  CellProducts a = CellProducts::euclidean(dc);
  ElementSystem sub = locally_harmonic_subsystem(parent, a, threads);
  ordered_json log;
  log["dual_mesh"] = mesh_out;
  ordered_json perk = ordered_json::array();
  ordered_json basis_out;
  basis_out["degrees"] = ordered_json::array();
  for (int k = 0; k <= dc.dim(); ++k) {
    GlobalSpace canon = canonical_harmonic_basis(sub, k);
    MatQ rho = de_rham_matrix(sub, canon);
    bool identity = rho == MatQ::Identity(rho.rows(), rho.cols());
    ordered_json row;
    row["k"] = k;
    row["dim"] = static_cast<long>(canon.dim());
    row["rho_identity"] = identity;
    perk.push_back(row);
    ordered_json deg;
    deg["k"] = k;
    ordered_json fams = ordered_json::array();
    for (Eigen::Index f = 0; f < canon.dim(); ++f)
      fams.push_back(family_to_json(dc, sub, canon, f));
    deg["families"] = std::move(fams);
    basis_out["degrees"].push_back(std::move(deg));
    if (!identity) {
      log["verdict"] = perk;
      std::cout << log.dump(2) << "\n";
      return kDomainFailure;
    }
  }
  std::ofstream bout(mesh_out + ".basis.json");
  bout << basis_out.dump(2) << "\n";
  log["basis"] = mesh_out + ".basis.json";
  log["verdict"] = perk;
  std::cout << log.dump(2) << "\n";
  return kOk;
}

int cmd_eig(const std::string& mesh_path, int order, int k, int count,
            const std::string& out_path)
{
  MeshFile mesh = load_mesh(mesh_path);
  MeshOrders orders = resolve_orders(mesh, order, {});
  ElementSystem sys = trimmed_system(mesh.complex, orders);
  MirrorSystem mirrors =
      canonical_trimmed_mirrors(mesh.complex, orders.default_order);
  AssembledPair below =
      (k >= 1) ? assemble(sys, mirrors, k - 1) : AssembledPair{};
  AssembledPair at = assemble(sys, mirrors, k);
  EigenResult eig = hodge_eigenvalues(at, count);
  int betti = -1;
  if (k >= 1)
    betti = exact_betti(below, at);
  else
    betti = static_cast<int>(at.space.dim() - rank(at.d));
  std::string csv = "index,eigenvalue,zero_modes,betti\n";
  for (size_t i = 0; i < eig.eigenvalues.size(); ++i)
    csv += std::to_string(i) + "," + fmt12(eig.eigenvalues[i]) + "," +
           std::to_string(eig.zero_modes) + "," + std::to_string(betti) + "\n";
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(out_path);
    out << csv;
    write_matrix_triplets(out_path + ".mass.txt", at.mass, "M");
    write_matrix_triplets(out_path + ".d.txt", to_double(at.d), "D");
    write_matrix_triplets(out_path + ".stiffness.txt", at.stiffness(), "K");
  }
  if (eig.count_clamped)
    std::cerr << "note: count clamped to the space dimension\n";
  return kOk;
}

int cmd_interp_test(const std::string& mesh_path, int order,
                    const std::string& alpha_str, const std::string& out_path)
{
  MeshFile mesh = load_mesh(mesh_path);
  MeshOrders orders = resolve_orders(mesh, order, {});
  const int p = orders.default_order;
  ElementSystem sys = trimmed_system(mesh.complex, orders);
  ElementSystem host = trimmed_system(mesh.complex, p + 1);
  MirrorSystem mirrors = canonical_trimmed_mirrors(mesh.complex, p);
  bool faithful = faithfulness_check(mirrors, sys);
  bool commutes = commutation_check(mirrors, host);
  DiagramReport report = commuting_diagram_report(sys, mirrors, host);
  ordered_json j;
  j["faithful"] = faithful;
  j["eq86_commutation"] = commutes;
  j["dI_eq_Id"] = report.d_commutes;
  j["rho_preserved"] = report.integrals_preserved;
  j["cohomology_isomorphism"] = report.cohomology_isomorphism;
  if (!report.detail.empty()) j["detail"] = report.detail;
  bool ok = faithful && commutes && report.all();

  if (!alpha_str.empty()) {
    VecD alpha(mesh.complex.ambient_dim());
    std::stringstream ss(alpha_str);
    std::string item;
    Eigen::Index at = 0;
    while (std::getline(ss, item, ',') && at < alpha.size())
      alpha(at++) = std::stod(item);
    if (at != alpha.size()) {
      std::cerr << "error: --weight-alpha needs " << alpha.size()
                << " components\n";
      return kUsage;
    }
    std::map<int, VecD> per_cell;
    for (int ci = 0; ci < mesh.complex.num_cells(); ++ci)
      per_cell[ci] = alpha;
    CellProducts up = upwinded_products(mesh.complex, per_cell, +1, 2 * p + 6);
    CellProducts down = upwinded_products(mesh.complex, per_cell, -1, 2 * p + 6);
    CellProducts eucl = CellProducts::euclidean(mesh.complex);
    ElementSystem esub = locally_harmonic_subsystem(sys, eucl);
    auto ucoords = locally_harmonic_coords_num(sys, up);
    auto dcoords = locally_harmonic_coords_num(sys, down);
    bool dims_ok = true;
    double angle = 0;
    for (const auto& [key, mat] : ucoords) {
      if (mat.cols() != esub.space_dim(key.first, key.second)) dims_ok = false;
      if (dcoords.count(key) && mat.cols() > 0)
        angle = std::max(angle, subspace_angle(mat, dcoords.at(key)));
    }
    ordered_json upwind;
    upwind["dims_match_exact_subsystem"] = dims_ok;
    upwind["upwind_downwind_angle"] = fmt12(angle);
    j["upwinded"] = std::move(upwind);
    ok = ok && dims_ok;
  }
  emit(j, out_path);
  return ok ? kOk : kDomainFailure;
}

int cmd_tensor_check(const std::string& mesh_u, const std::string& mesh_v,
                     int order, const std::string& out_path)
{
  MeshFile mu = load_mesh(mesh_u);
  MeshFile mv = load_mesh(mesh_v);
  const int p = order > 0 ? order : 1;
  ProductComplex pc = product_complex(mu.complex, mv.complex);
  ElementSystem a = trimmed_system(mu.complex, p);
  ElementSystem b = trimmed_system(mv.complex, p);
  ElementSystem c = tensor_system(pc, mu.complex, mv.complex, a, b);
  TensorCheckReport report =
      tensor_dimension_checks(pc, mu.complex, mv.complex, a, b, c);
  MirrorSystem z = canonical_trimmed_mirrors(mu.complex, p);
  MirrorSystem y = canonical_trimmed_mirrors(mv.complex, p);
  MirrorSystem zy = tensor_mirrors(pc, mu.complex, mv.complex, a, b, z, y);
  bool tensor_faithful = faithfulness_check(zy, c);
  ordered_json j;
  j["kernel_identity"] = report.kernel_identity;
  j["global_dims"] = report.global_dims;
  j["extensions"] = report.extensions;
  j["mayer_vietoris"] = report.mayer_vietoris;
  j["local_exactness"] = report.local_exactness;
  j["tensor_mirrors_faithful"] = tensor_faithful;
  if (!report.detail.empty()) j["detail"] = report.detail;
  emit(j, out_path);
  return (report.all() && tensor_faithful) ? kOk : kDomainFailure;
}

int cmd_smooth_test(int p, int d, double eps, const std::string& out_path)
{
  ordered_json j;
  bool ok = true;
  double worst_moment = 0;
  for (int pp = 0; pp <= p; ++pp) {
    Kernel psi = make_kernel(pp, d);
    worst_moment =
        std::max(worst_moment, kernel_moment_residual(psi, pp + d));
  }
  j["moment_residual"] = fmt12(worst_moment);
  ok = ok && worst_moment <= 1e-10;

  Kernel psi = make_kernel(p, d);
  BallRule rule = default_ball_rule(psi);
  ScaleField flat = ScaleField::constant(d, 1.0);
  // polynomial reproduction at interior points
  double worst_repro = 0;
  {
    std::vector<PolyForm> monos = full_poly_basis(p, std::min(1, d), d);
    for (const auto& m : monos) {
      SampledForm sm = SampledForm::from_poly(m, VecD::Constant(d, -100.0),
                                              VecD::Constant(d, 100.0));
      for (int t = 0; t < 5; ++t) {
        VecD x = VecD::Constant(d, -0.8 + 0.4 * t);
        auto r = regularize(sm, flat, eps, psi, x, rule);
        auto exact = m.evaluate(x);
        for (const auto& [mask, val] : r) {
          double want = exact.count(mask) ? exact.at(mask) : 0.0;
          worst_repro = std::max(worst_repro, std::abs(val - want));
        }
      }
    }
  }
  j["reproduction_residual"] = fmt12(worst_repro);
  ok = ok && worst_repro <= 1e-8;

  if (d == 2) {
    SampledForm sin_form;
    sin_form.dim = 2;
    sin_form.degree = 1;
    sin_form.box_lo = VecD::Constant(2, -10.0);
    sin_form.box_hi = VecD::Constant(2, 10.0);
    sin_form.coeff = [](AltMask mask, const VecD& x) {
      if (mask == 1)
        return std::sin(2 * M_PI * x(0)) * std::cos(2 * M_PI * x(1));
      return 0.0;
    };
    sin_form.d_coeff = [](AltMask, const VecD& x) {
      return 2 * M_PI * std::sin(2 * M_PI * x(0)) * std::sin(2 * M_PI * x(1));
    };
    std::vector<VecD> pts;
    for (int t = 0; t < 3; ++t) {
      VecD x(2);
      x << 0.15 * t - 0.2, 0.1 * t + 0.05;
      pts.push_back(x);
    }
    double resid =
        commutation_residual(sin_form, flat, eps, psi, pts, 1e-4, rule);
    j["commutation_residual"] = fmt12(resid);
    ok = ok && resid <= 1e-5;
  }
  if (!out_path.empty()) {
    // kernel profile as CSV (radius, value)
    std::ofstream out(out_path);
    out << "radius,value\n";
    for (int i = 0; i <= 100; ++i) {
      double r = i / 100.0;
      out << fmt12(r) << "," << fmt12(psi.radial(r)) << "\n";
    }
    j["profile_csv"] = out_path;
  }
  j["pass"] = ok;
  std::cout << j.dump(2) << "\n";
  return ok ? kOk : kDomainFailure;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"finite element systems of differential forms: construction "
               "and verification"};
  app.require_subcommand(1);

  std::string mesh_path, mesh_path2, orders_path, out_path, alpha_str;
  int order = 0, k = 0, count = 10, threads = 1, kp = 2, kd = 2;
  double eps = 0.05;

  auto add_common = [&](CLI::App* sub, bool needs_mesh = true) {
    if (needs_mesh)
      sub->add_option("mesh", mesh_path, "mesh JSON file")->required();
    sub->add_option("--out", out_path, "output path");
    sub->add_option("--threads", threads, "worker threads");
  };

  CLI::App* check = app.add_subcommand("check", "compatibility verdicts");
  add_common(check);
  check->add_option("--order", order, "constant trimmed order");
  check->add_option("--orders", orders_path, "per-cell orders JSON");

  CLI::App* betti = app.add_subcommand("betti", "Betti numbers of the mesh");
  add_common(betti);

  CLI::App* basis = app.add_subcommand("basis", "global basis export");
  add_common(basis);
  basis->add_option("--order", order, "constant trimmed order");
  basis->add_option("--orders", orders_path, "per-cell orders JSON");
  basis->add_option("--k", k, "form degree");

  CLI::App* dual = app.add_subcommand("dual", "dual mesh + harmonic basis");
  add_common(dual);

  CLI::App* eig = app.add_subcommand("eig", "Hodge-Laplacian eigenvalues");
  add_common(eig);
  eig->add_option("--order", order, "constant trimmed order");
  eig->add_option("--k", k, "form degree");
  eig->add_option("--count", count, "number of nonzero eigenvalues");

  CLI::App* interp = app.add_subcommand("interp-test", "commuting diagram");
  add_common(interp);
  interp->add_option("--order", order, "constant trimmed order");
  interp->add_option("--weight-alpha", alpha_str, "upwind field a,b[,c]");

  CLI::App* tensor = app.add_subcommand("tensor-check", "tensor theorems");
  tensor->add_option("meshU", mesh_path, "first factor mesh")->required();
  tensor->add_option("meshV", mesh_path2, "second factor mesh")->required();
  tensor->add_option("--order", order, "trimmed order of both factors");
  tensor->add_option("--out", out_path, "output path");
  tensor->add_option("--threads", threads, "worker threads");

  CLI::App* smooth = app.add_subcommand("smooth-test", "smoothing diagnostics");
  smooth->add_option("--p", kp, "preserved polynomial degree");
  smooth->add_option("--d", kd, "space dimension");
  smooth->add_option("--epsilon", eps, "regularization scale");
  smooth->add_option("--out", out_path, "kernel profile CSV");
  smooth->add_option("--threads", threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (check->parsed())
      return cmd_check(mesh_path, order, orders_path, threads, out_path);
    if (betti->parsed()) return cmd_betti(mesh_path, out_path);
    if (basis->parsed())
      return cmd_basis(mesh_path, order, orders_path, k, out_path);
    if (dual->parsed()) return cmd_dual(mesh_path, threads, out_path);
    if (eig->parsed()) return cmd_eig(mesh_path, order, k, count, out_path);
    if (interp->parsed())
      return cmd_interp_test(mesh_path, order, alpha_str, out_path);
    if (tensor->parsed())
      return cmd_tensor_check(mesh_path, mesh_path2, order, out_path);
    if (smooth->parsed()) return cmd_smooth_test(kp, kd, eps, out_path);
  } catch (const MeshParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const OrderNotMonotone& e) {
    std::cerr << "order error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainFailure;
  }
  return kUsage;
}
