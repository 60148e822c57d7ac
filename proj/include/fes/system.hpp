// Finite element systems over a cellular complex.
//
// A form on a cell is stored as a family of chart forms over the simplices
// in the closure of the cell's support, with matching traces; on a plain
// simplicial cell this is just a polynomial form together with its traces.
// Spaces on agglomerated cells are the inverse limits of the per-simplex
// spaces, which keeps piecewise systems (dual meshes, coarsened meshes)
// inside the same machinery.

#ifndef FES_SYSTEM_HPP
#define FES_SYSTEM_HPP

#include <functional>
#include <memory>
#include <mutex>

#include "fes/complex.hpp"
#include "fes/meshio.hpp"
#include "fes/polyform.hpp"

namespace fes {

struct OrderNotMonotone : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConditionViolated : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotASubcell : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotInSpace : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotCompatible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A differential form attached to a cell: chart forms indexed by the
/// simplices of the cell's closure, with matching traces.
class CellForm {
 public:
  CellForm() = default;
  explicit CellForm(int degree) : degree_(degree) {}

  int degree() const { return degree_; }
  bool empty() const { return parts_.empty(); }
  bool is_zero() const;
  const std::map<int, PolyForm>& parts() const { return parts_; }
  bool has_part(int sid) const { return parts_.count(sid) != 0; }
  const PolyForm& part(int sid) const;
  void set_part(int sid, PolyForm f);

  /// Subfamily over the given simplices (all must be present).
  CellForm restricted(const std::vector<int>& sids) const;

  CellForm& operator+=(const CellForm& o);
  CellForm& operator*=(const Rational& c);
  friend CellForm operator+(CellForm a, const CellForm& b) { return a += b; }
  friend CellForm operator*(const Rational& c, CellForm a) { return a *= c; }

 private:
  int degree_ = 0;
  std::map<int, PolyForm> parts_;
};

/// Exterior derivative, part by part (commutes with traces).
CellForm d(const CellForm& u);

/// Family of an ambient polynomial form over the given simplices.
CellForm ambient_to_cell(const Complex& cx, const std::vector<int>& sids,
                         const PolyForm& u);

/// Complete a family given on the support simplices of a cell by trace
/// propagation; throws NotInSpace if traces mismatch on shared faces.
CellForm complete_from_support(const Complex& cx, int ci,
                               std::map<int, PolyForm> support_parts);

/// Signed integral of a family over a cell (degree == cell dimension).
Rational integrate_cell(const Complex& cx, int ci, const CellForm& u);

/// Element system: a basis of CellForms per (cell, degree).
class ElementSystem {
 public:
  explicit ElementSystem(const Complex& cx);

  const Complex& complex() const { return *cx_; }

  void set_basis(int ci, int k, std::vector<CellForm> basis);
  const std::vector<CellForm>& basis(int ci, int k) const;
  Eigen::Index space_dim(int ci, int k) const;

  /// Matrix of the trace A^k(big) -> A^k(small) in the two bases.
  MatQ restriction(int big, int small, int k) const;
  /// Matrix of d : A^k(T) -> A^{k+1}(T) in the two bases.
  MatQ cell_d(int ci, int k) const;
  /// Columns: coordinates of a basis of A_0^k(T) inside basis(T, k).
  MatQ kernel_coords(int ci, int k) const;

  /// Coordinates of a family in basis(T, k); throws NotInSpace.
  VecQ coords_of(int ci, int k, const CellForm& u) const;
  CellForm from_coords(int ci, int k, const VecQ& coords) const;
  bool contains(int ci, int k, const CellForm& u) const;

  /// Is the constant function 1 in A^0(T)?
  bool has_constants(int ci) const;

  /// Def-2 closure: d-images and traces stay inside the system.
  /// Throws NotInSpace with the offending cell on failure.
  void verify_closure() const;

 private:
  struct Cache {
    std::mutex mutex;
    std::map<std::tuple<int, int, int>, MatQ> restriction;
    std::map<std::pair<int, int>, MatQ> d;
    std::map<std::pair<int, int>, MatQ> kernel;
  };

  const Complex* cx_;
  std::vector<std::map<int, std::vector<CellForm>>> bases_;
  std::unique_ptr<Cache> cache_ = std::make_unique<Cache>();
};

/// Trimmed polynomial system of constant order p (Whitney forms at p = 1).
ElementSystem trimmed_system(const Complex& cx, int p);

/// Variable-order trimmed system: order function per cell, monotone under
/// inclusion of subcells (throws OrderNotMonotone otherwise).
ElementSystem trimmed_system(const Complex& cx, const MeshOrders& orders);

/// Full polynomial system A^k(T) = P_{pi(T,k)} A^k(T); pi must satisfy the
/// monotonicity conditions (throws ConditionViolated).
ElementSystem polynomial_system(
    const Complex& cx, const std::function<int(int ci, int k)>& pi);

/// A global form: per-cell coordinates, sparse over the cells it touches.
struct GlobalSpace {
  int degree = 0;
  std::vector<int> cells;  // subcomplex view, ordered by (dim, index)
  std::vector<std::map<int, VecQ>> families;
  std::vector<std::string> labels;  // one per family, for reports

  Eigen::Index dim() const { return static_cast<Eigen::Index>(families.size()); }
  /// Family f as a CellForm on cell ci (zero if absent from the family).
  CellForm family_on(const ElementSystem& sys, Eigen::Index f, int ci) const;
};

/// Inverse limit over a subcell-closed view, by exact null space of the
/// matching constraints.  Basis is in reduced echelon form over the
/// deterministic (cell, coordinate) ordering.
GlobalSpace global_space(const ElementSystem& sys, std::vector<int> view,
                         int k);

/// Coordinates of a consistent per-cell family in the global basis.
VecQ global_coords_of(const ElementSystem& sys, const GlobalSpace& gs,
                      const std::map<int, VecQ>& family);

/// Exact matrix of d : A^k -> A^{k+1} between two global spaces.
MatQ global_d_matrix(const ElementSystem& sys, const GlobalSpace& from,
                     const GlobalSpace& to);

/// De Rham matrix: rows = k-cells of the view, columns = families.
MatQ de_rham_matrix(const ElementSystem& sys, const GlobalSpace& gs);

/// De Rham image of one global family as a cochain.
Cochain de_rham_cochain(const ElementSystem& sys, const GlobalSpace& gs,
                        const VecQ& coords);

struct CellVerdict {
  std::string cell;
  int k = 0;
  bool extensions = true;
  bool exact_interior = true;  // interior exactness verdict
  bool exact_boundary = true;  // boundary-condition exactness verdict
};

struct CompatibilityReport {
  bool compatible = false;
  bool admits_extensions = false;
  bool locally_exact = false;
  bool kernel_count_equality = false;  // dim A^k(global) == sum of dim A_0^k
  std::vector<CellVerdict> verdicts;
  // dimension table: per cell and degree, dim A^k(T) and dim A_0^k(T)
  std::vector<std::tuple<std::string, int, Eigen::Index, Eigen::Index>> dims;
  std::map<int, Eigen::Index> global_dims;
  std::string first_failure;

  std::string to_json() const;
};

/// Extensions verdict for one cell and degree: restriction onto the
/// boundary complex is surjective.
bool check_extension(const ElementSystem& sys, int ci, int k);

/// Exactness of 0 -> R -> A^0(T) -> ... -> A^top(T) -> 0 on one cell.
bool check_exactness_interior(const ElementSystem& sys, int ci);
/// Exactness of the zero-trace variant with the integration tail.
bool check_exactness_boundary(const ElementSystem& sys, int ci);

CompatibilityReport compatibility(const ElementSystem& sys, int threads = 1);

struct CohomologyReport {
  bool isomorphic = false;
  std::vector<int> system_betti;
  std::vector<int> cochain_betti;
  std::string detail;
};

/// The De Rham map induces isomorphisms on cohomology.
CohomologyReport discrete_cohomology_check(const ElementSystem& sys);

/// Exact Gram matrix of chart forms over the standard simplex:
/// density * int <u, v>_{ginv} dt.
MatQ gram_std(const std::vector<PolyForm>& basis, const MatQ& ginv,
              const Rational& density);

}  // namespace fes

#endif
