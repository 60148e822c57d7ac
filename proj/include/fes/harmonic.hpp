// Scalar products on element spaces, A-harmonic conditions, harmonic
// extension, locally harmonic subsystems and upwinded (weighted) variants.
//
// Exact products are piecewise constant metrics with rational densities:
// per support simplex a chart metric inverse and a positive density.  The
// orthogonality conditions defining harmonicity are invariant under a
// per-cell rescaling of the product, so rational densities lose nothing.
// Weighted products (exp(-beta)) are evaluated by quadrature in doubles.

#ifndef FES_HARMONIC_HPP
#define FES_HARMONIC_HPP

#include "fes/quadrature.hpp"
#include "fes/system.hpp"

namespace fes {

struct SequenceInexact : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotExtendable : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParentNotCompatible : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct QuadratureFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-cell scalar products, defined simplex by simplex.
class CellProducts {
 public:
  struct ExactPart {
    MatQ ginv;         // inverse chart metric
    Rational density;  // positive
  };
  struct NumericPart {
    MatD ginv;
    double density = 1.0;                       // volume factor
    std::function<double(const VecD&)> weight;  // evaluated in chart coords
  };

  /// Pullback of the ambient Euclidean metric; rational density |det E|
  /// on top-dimensional simplices, 1 on lower ones (a per-cell rescaling).
  static CellProducts euclidean(const Complex& cx);

  /// Piecewise constant ambient metrics (one SPD rational matrix per
  /// simplex id; missing ids fall back to the identity).
  static CellProducts piecewise_metric(const Complex& cx,
                                       const std::map<int, MatQ>& metric);

  bool exact() const { return exact_; }
  int quadrature_degree() const { return quad_degree_; }
  void set_quadrature_degree(int deg) { quad_degree_ = deg; }

  Rational pair(const Complex& cx, int ci, const CellForm& u,
                const CellForm& v) const;
  double pair_num(const Complex& cx, int ci, const CellForm& u,
                  const CellForm& v) const;

  /// Gram matrix of basis(ci, k).
  MatQ gram(const ElementSystem& sys, int ci, int k) const;
  MatD gram_num(const ElementSystem& sys, int ci, int k) const;

  /// Weighted pairing of a pointwise-evaluable form against a CellForm
  /// (for non-polynomial test fields).
  double pair_num_callable(
      const Complex& cx, int ci,
      const std::function<std::map<AltMask, double>(int, const VecD&)>& u,
      const CellForm& v) const;

  const ExactPart& exact_part(int sid) const { return exact_parts_.at(sid); }
  const NumericPart& numeric_part(int sid) const
  {
    return numeric_parts_.at(sid);
  }

  friend CellProducts upwinded_products(const Complex& cx,
                                        const std::map<int, VecD>& alpha,
                                        int sign, int quad_degree);

 private:
  bool exact_ = true;
  int quad_degree_ = 10;
  std::map<int, ExactPart> exact_parts_;
  std::map<int, NumericPart> numeric_parts_;
};

/// Weighted products a(u, v) = int_T exp(-+beta_T) <u, v>, with beta_T the
/// zero-mean affine function on T whose differential is the constant
/// 1-form alpha_T (given per cell, ambient coefficients).  Positive sign
/// flag selects exp(-beta); negative selects exp(+beta).
CellProducts upwinded_products(const Complex& cx,
                               const std::map<int, VecD>& alpha, int sign,
                               int quad_degree = 10);

/// A-harmonicity verdict, exact products only.
bool a_harmonic_check(const ElementSystem& sys, const CellProducts& a, int ci,
                      int k, const CellForm& u);

/// Unique A-harmonic extension of boundary data (coordinates per direct
/// boundary cell).  Requires boundary-condition exactness on the cell.
VecQ harmonic_extension(const ElementSystem& sys, const CellProducts& a,
                        int ci, int k, const std::map<int, VecQ>& boundary);

/// Unique A-harmonic top-degree form with prescribed integral.
VecQ harmonic_top_form(const ElementSystem& sys, const CellProducts& a,
                       int ci, const Rational& alpha);

/// Subsystem of forms whose every trace is A-harmonic; the parent must be
/// compatible.
ElementSystem locally_harmonic_subsystem(const ElementSystem& parent,
                                         const CellProducts& a,
                                         int threads = 1);

/// Numeric variant: per (cell, k), columns of locally harmonic coordinates
/// inside the parent basis (for weighted products).
std::map<std::pair<int, int>, MatD> locally_harmonic_coords_num(
    const ElementSystem& parent, const CellProducts& a);

/// Canonical cochain-indexed basis of a locally harmonic system: for each
/// k-cell the unique global form whose De Rham image is that cell's
/// indicator cochain.  Requires rho to be square and invertible.
GlobalSpace canonical_harmonic_basis(const ElementSystem& harmonic, int k);

/// Largest principal angle (radians) between the column spans of two
/// matrices; used to compare upwind and downwind test spaces.
double subspace_angle(const MatD& a, const MatD& b);

}  // namespace fes

#endif
