// Global mass and derivative assembly and the discrete Hodge-Laplacian
// eigenvalue pipeline.

#ifndef FES_ASSEMBLY_HPP
#define FES_ASSEMBLY_HPP

#include "fes/mirror.hpp"
#include "fes/system.hpp"

namespace fes {

struct SolverBreakdown : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AssembledPair {
  int degree = 0;
  GlobalSpace space;       // basis of A^k
  GlobalSpace space_up;    // basis of A^{k+1}
  MatQ d;                  // exact D_k: A^k -> A^{k+1}
  MatD mass;               // M_k, SPD
  MatD mass_up;            // M_{k+1}
  MatD stiffness() const { return to_double(d).transpose() * mass_up * to_double(d); }
};

/// Mass matrix of a global space: exact per-cell Gram blocks over the
/// top-dimensional cells, scattered through the family coordinates.
MatD assemble_mass(const ElementSystem& sys, const GlobalSpace& gs);

/// Fast path: global bases dual to a faithful commuting mirror system;
/// the derivative matrix is exact (mirror values of d on basis families).
AssembledPair assemble(const ElementSystem& sys, const MirrorSystem& mirrors,
                       int k);

/// Generic path through exact global null spaces (desk-scale meshes).
AssembledPair assemble_generic(const ElementSystem& sys, int k);

struct EigenResult {
  std::vector<double> eigenvalues;  // nonzero, ascending
  int zero_modes = 0;
  Eigen::Index dim = 0;
  bool count_clamped = false;
};

/// Nonzero generalized eigenvalues of K_k u = lambda M_k u; zero modes
/// filtered at relative threshold 1e-8 of the largest eigenvalue.
EigenResult hodge_eigenvalues(const AssembledPair& pair, int count);

/// Exact discrete Betti number at degree k from the derivative ranks.
int exact_betti(const AssembledPair& below, const AssembledPair& at);

/// Zero modes of the full Hodge Laplacian (d*d + dd*) at degree k,
/// counted numerically from the assembled pairs at k-1 and k.
int full_hodge_zero_modes(const AssembledPair& below, const AssembledPair& at);

/// Coordinate-triplet text export (row, col, value) with a JSON header
/// line prefixed by '#'.
void write_matrix_triplets(const std::string& path, const MatD& m,
                           const std::string& name);

struct DiagramReport {
  bool d_commutes = false;
  bool integrals_preserved = false;
  bool cohomology_isomorphism = false;
  std::string detail;
  bool all() const
  {
    return d_commutes && integrals_preserved && cohomology_isomorphism;
  }
};

/// Diagram (7) checks for the interpolator of a faithful mirror system:
/// dI = Id on a polynomial sample from the host, rho I = rho, and induced
/// isomorphisms on cohomology.
DiagramReport commuting_diagram_report(const ElementSystem& sys,
                                       const MirrorSystem& mirrors,
                                       const ElementSystem& host);

}  // namespace fes

#endif
