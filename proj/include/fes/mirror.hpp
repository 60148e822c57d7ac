// Mirror systems: degrees of freedom as geometrically located functionals,
// faithfulness, interpolators, commutation with d, and the bijection
// between mirror systems and (interpolator, extension) pairs.

#ifndef FES_MIRROR_HPP
#define FES_MIRROR_HPP

#include "fes/harmonic.hpp"
#include "fes/system.hpp"

namespace fes {

struct NotFaithful : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InconsistentInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ExtensionsUnverified : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct HostSpaceTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PreconditionFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One degree-of-freedom functional on a cell.
struct MirrorFunctional {
  enum class Kind {
    Wedge,     // u -> int_T w ^ u, weight per support simplex
    Product,   // u -> a(u, v)
    ProductD,  // u -> a(du, v)
    Integral,  // u -> int_T u (top degree)
    Covector,  // u -> row . host_coords(u)
  };
  Kind kind = Kind::Wedge;
  int cell = -1;
  int degree = 0;
  std::map<int, PolyForm> wedge_weight;  // Wedge: per support simplex
  CellForm product_arg;                  // Product / ProductD
  RowVecQ covector;                      // Covector, against host basis
};

class MirrorSystem {
 public:
  MirrorSystem() = default;

  void add(int ci, int k, MirrorFunctional l);
  const std::vector<MirrorFunctional>& mirrors(int ci, int k) const;

  /// Products backing Product/ProductD functionals (must stay alive).
  void set_products(const CellProducts* a) { products_ = a; }
  /// Host system backing Covector functionals (must stay alive).
  void set_host(const ElementSystem* host) { host_ = host; }
  const ElementSystem* host() const { return host_; }

  /// Exact evaluation of a functional on a family over its cell.
  Rational evaluate(const Complex& cx, const MirrorFunctional& l,
                    const CellForm& u) const;

 private:
  std::map<std::pair<int, int>, std::vector<MirrorFunctional>> mirrors_;
  const CellProducts* products_ = nullptr;
  const ElementSystem* host_ = nullptr;
};

/// Canonical trimmed mirror system of order p (wedge pairings against
/// complementary-degree polynomial weights).
MirrorSystem canonical_trimmed_mirrors(const Complex& cx, int p);

/// Plain product mirrors: Z^k(T) = { a(., v) : v in A_0^k(T) }.
MirrorSystem l2_projection_mirrors(const ElementSystem& sys,
                                   const CellProducts& a);

/// Harmonic mirrors: pairings against d-images of boundary kernels plus
/// the integral at top degree; faithful with a commuting interpolator.
MirrorSystem harmonic_mirrors(const ElementSystem& sys, const CellProducts& a);

/// Pairing matrix of Z^k(T) against a basis of A_0^k(T).
MatQ pairing_matrix(const MirrorSystem& mirrors, const ElementSystem& sys,
                    int ci, int k);

/// Faithfulness: extensions + invertible pairings per (cell, degree).
/// Throws ExtensionsUnverified when the system lacks extensions.
bool faithfulness_check(const MirrorSystem& mirrors, const ElementSystem& sys);

/// Interpolation onto the system by the skeleton sweep: per-cell
/// coordinates of I u for a restriction-consistent input family.
std::map<int, VecQ> interpolate(const MirrorSystem& mirrors,
                                const ElementSystem& sys,
                                const std::map<int, CellForm>& u, int k);

/// Interpolation data given directly as mirror values per (cell, index).
std::map<int, VecQ> interpolate_values(
    const MirrorSystem& mirrors, const ElementSystem& sys, int k,
    const std::function<Rational(int ci, size_t idx)>& value);

/// Global basis dual to a faithful mirror system; each family is the
/// interpolant of one indicator DOF and is supported on the star of its
/// cell.  Linear cost in the mesh size.
GlobalSpace dof_dual_global_space(const MirrorSystem& mirrors,
                                  const ElementSystem& sys, int k);

/// Commutation condition: every l.d lies in the span of the degree-(k-1)
/// mirrors on the subcells.
bool commutation_check(const MirrorSystem& mirrors, const ElementSystem& host);

/// The unique extension of boundary data annihilated by the cell's own
/// mirrors; boundary data as coordinates per boundary-complex cell.
VecQ extension_from_mirrors(const MirrorSystem& mirrors,
                            const ElementSystem& sys, int ci, int k,
                            const std::map<int, VecQ>& boundary);

/// Matrix of the mirror extension A^k(dT) -> A^k(T) against a global
/// basis of the boundary complex.
MatQ extension_matrix(const MirrorSystem& mirrors, const ElementSystem& sys,
                      int ci, int k, const GlobalSpace& boundary_space);

/// Matrix of the interpolator Host^k(T~) -> A^k(T) on a host system
/// containing the target (single-cell interpolation over the subcomplex).
MatQ cell_interpolator_matrix(const MirrorSystem& mirrors,
                              const ElementSystem& sys,
                              const ElementSystem& host, int ci, int k);

/// The mirror system z(I, E) determined by interpolator and extension
/// matrices over a host system; returns Covector functionals.
MirrorSystem mirror_from_ie(const ElementSystem& sys,
                            const ElementSystem& host,
                            const MirrorSystem& source_mirrors);

/// Extension-projection interpolator.  E and P are supplied
/// as per-(cell, k) matrices; the commutation and integral-preservation
/// preconditions are verified and
/// a PreconditionFailed names the first failing diagram slot.
class EPInterpolator {
 public:
  // E^k(T): coordinates over global boundary basis -> A^k(T) coords.
  // The boundary global spaces are built internally (deterministic).
  using ExtensionProvider =
      std::function<MatQ(int ci, int k, const GlobalSpace& boundary)>;
  // P^k(T): Host^k(T) coords -> A^k(T) coords.
  using ProjectionProvider = std::function<MatQ(int ci, int k)>;

  EPInterpolator(const ElementSystem& sys, const ElementSystem& host,
                 ExtensionProvider ext, ProjectionProvider proj);

  /// Per-cell coordinates of J u for a host global family.
  std::map<int, VecQ> apply(const std::map<int, VecQ>& host_coords,
                            int k) const;

  const GlobalSpace& boundary_space(int ci, int k) const;

 private:
  const ElementSystem* sys_;
  const ElementSystem* host_;
  std::map<std::pair<int, int>, GlobalSpace> boundary_spaces_;
  std::map<std::pair<int, int>, MatQ> ext_;   // per (cell, k)
  std::map<std::pair<int, int>, MatQ> proj_;  // per (cell, k)
  void verify_preconditions() const;
};

/// Mirror-annihilator extensions packaged for EPInterpolator.
EPInterpolator::ExtensionProvider mirror_extension_provider(
    const MirrorSystem& mirrors, const ElementSystem& sys);

/// Harmonic extensions (these commute with d slotwise) for EPInterpolator.
EPInterpolator::ExtensionProvider harmonic_extension_provider(
    const ElementSystem& sys, const CellProducts& a);

/// Plain a-projection onto A^k(T) per cell (does not commute with d in
/// general; EPInterpolator will reject it when it does not).
EPInterpolator::ProjectionProvider l2_projection_provider(
    const ElementSystem& sys, const ElementSystem& host,
    const CellProducts& a);

/// DOF table for downstream assembly: one row per functional with its
/// covector entries against the cell basis.
std::string dof_table_json(const MirrorSystem& mirrors,
                           const ElementSystem& sys);

/// Per-cell canonical interpolation packaged as a projection provider.
EPInterpolator::ProjectionProvider mirror_projection_provider(
    const MirrorSystem& mirrors, const ElementSystem& sys,
    const ElementSystem& host);

}  // namespace fes

#endif
