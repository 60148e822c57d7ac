// Polynomial differential forms with exact rational coefficients.
//
// A PolyForm of degree k on R^n is a finite sum  sum_{alpha,I} c dx^alpha dx_I
// stored as a map keyed by (alternating index bitmask, monomial exponents).
// Exterior derivative, wedge, Koszul contraction, affine pullback and
// simplex integration are all exact.

#ifndef FES_POLYFORM_HPP
#define FES_POLYFORM_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fes/exact_linalg.hpp"
#include "fes/rational.hpp"

namespace fes {

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegreeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Strictly increasing coordinate index sets are stored as bitmasks.
using AltMask = std::uint32_t;

inline int mask_size(AltMask m) { return __builtin_popcount(m); }

/// Indices of a mask in increasing order.
std::vector<int> mask_indices(AltMask m);
AltMask mask_from_indices(const std::vector<int>& idx);

/// Monomial exponent vector, one entry per coordinate.
using Monomial = std::vector<int>;

struct TermKey {
  AltMask mask;
  Monomial mono;
  bool operator<(const TermKey& o) const
  {
    if (mask != o.mask) return mask < o.mask;
    return mono < o.mono;
  }
  bool operator==(const TermKey& o) const
  {
    return mask == o.mask && mono == o.mono;
  }
};

class PolyForm {
 public:
  PolyForm() : dim_(0), degree_(0) {}
  PolyForm(int dim, int degree) : dim_(dim), degree_(degree)
  {
    if (degree < 0 || degree > dim)
      throw DegreeMismatch("form degree out of range");
  }

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  bool is_zero() const { return terms_.empty(); }
  int poly_degree() const;  // max |alpha|, -1 for the zero form

  const std::map<TermKey, Rational>& terms() const { return terms_; }

  /// Adds c * x^mono dx_mask; drops the term if the sum cancels.
  void add_term(AltMask mask, Monomial mono, const Rational& c);
  Rational coeff(AltMask mask, const Monomial& mono) const;

  PolyForm& operator+=(const PolyForm& o);
  PolyForm& operator-=(const PolyForm& o);
  PolyForm& operator*=(const Rational& c);

  friend PolyForm operator+(PolyForm a, const PolyForm& b) { return a += b; }
  friend PolyForm operator-(PolyForm a, const PolyForm& b) { return a -= b; }
  friend PolyForm operator*(const Rational& c, PolyForm a) { return a *= c; }

  bool operator==(const PolyForm& o) const
  {
    return dim_ == o.dim_ && degree_ == o.degree_ && terms_ == o.terms_;
  }

  /// Coefficient function of one alternating index, as a 0-form.
  PolyForm component(AltMask mask) const;

  /// Evaluate all alternating components at a point (double path).
  std::map<AltMask, double> evaluate(const VecD& x) const;
  std::map<AltMask, Rational> evaluate(const VecQ& x) const;

  std::string str() const;

 private:
  int dim_;
  int degree_;
  std::map<TermKey, Rational> terms_;
};

/// Affine map x -> linear * x + offset, full column rank.
struct AffineEmbed {
  MatQ linear;
  VecQ offset;

  int source_dim() const { return static_cast<int>(linear.cols()); }
  int target_dim() const { return static_cast<int>(linear.rows()); }

  static AffineEmbed identity(int d);
  /// Chart of the simplex with the given vertex columns: t -> v0 + E t.
  static AffineEmbed simplex_chart(const MatQ& verts);
  AffineEmbed compose(const AffineEmbed& inner) const;  // this after inner
  VecQ apply(const VecQ& x) const;
};

PolyForm zero_form(int dim, int degree);
PolyForm constant_form(int dim, AltMask mask, const Rational& c);
PolyForm monomial_form(int dim, AltMask mask, Monomial mono, const Rational& c);

/// Exterior derivative; returns the zero (k+1)-form at top degree.
PolyForm d(const PolyForm& u);

/// Wedge product; returns zero if degrees overflow the dimension.
PolyForm wedge(const PolyForm& u, const PolyForm& v);

/// Koszul operator: contraction with the identity vector field.
PolyForm koszul(const PolyForm& u);

/// Pullback along an affine map into the form's space.
PolyForm pullback(const AffineEmbed& phi, const PolyForm& u);

/// Integral of a top-degree-on-chart form over the standard simplex
/// { t >= 0, sum t <= 1 } of dimension u.dim().
Rational integrate_std(const PolyForm& u);

/// Integral over the oriented simplex with the given vertex columns
/// (columns ordered; u.degree() == verts.cols()-1 required).
Rational integrate_simplex(const PolyForm& u, const MatQ& verts);

/// Monomial / alternating-index basis of P_p A^k(R^d); graded lex order.
std::vector<PolyForm> full_poly_basis(int p, int k, int d);

/// Basis of the trimmed space  Lambda_p^k = P_{p-1}A^k + koszul P_{p-1}A^{k+1},
/// reduced to a maximal independent subset in a fixed generator order.
std::vector<PolyForm> trimmed_basis(int p, int k, int d);

Rational trimmed_dimension(int p, int k, int d);
Rational full_poly_dimension(int p, int k, int d);

/// Whitney form of the subsimplex with local vertex indices `sigma`
/// (subset of {0..m}) on the m-dimensional reference chart; normalized so
/// that its integral over the subsimplex is one.
PolyForm whitney_form(int m, const std::vector<int>& sigma);

/// Barycentric coordinate lambda_i as a 0-form on the m-chart.
PolyForm barycentric(int m, int i);

/// All term keys appearing in any of the forms, sorted.
std::vector<TermKey> collect_keys(const std::vector<PolyForm>& forms);

/// Column j holds the coefficients of forms[j] over `keys`.
MatQ coeff_matrix(const std::vector<PolyForm>& forms,
                  const std::vector<TermKey>& keys);

/// Rebuild a form from coefficients over `keys`.
PolyForm form_from_coeffs(int dim, int degree,
                          const std::vector<TermKey>& keys, const VecQ& c);

/// Inner product <dt_I, dt_J> for the metric with inverse `ginv`:
/// the (I, J) minor determinant of ginv.
Rational alt_inner(const MatQ& ginv, AltMask I, AltMask J);

/// Pointwise inner product <u, v> as a 0-form, metric inverse `ginv`.
PolyForm pointwise_inner(const PolyForm& u, const PolyForm& v,
                         const MatQ& ginv);

}  // namespace fes

#endif
