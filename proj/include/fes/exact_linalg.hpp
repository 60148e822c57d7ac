// Dense linear algebra over an exact or floating scalar.
//
// The exact instantiation (Rational) is the workhorse: every rank, null
// space and solve behind the library's verdicts goes through these
// routines.  The double instantiation backs the weighted (quadrature)
// paths and uses a relative pivot threshold instead of exact zero tests.

#ifndef FES_EXACT_LINALG_HPP
#define FES_EXACT_LINALG_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fes/rational.hpp"

namespace fes {

struct SingularMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InconsistentSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline bool pivot_is_zero(const Rational& x, const Rational&) { return x == 0; }
inline bool pivot_is_zero(double x, double scale)
{
  return std::abs(x) <= 1e-12 * (scale > 0 ? scale : 1.0);
}

inline Rational pivot_scale(const MatQ&) { return Rational(1); }
inline double pivot_scale(const Eigen::MatrixXd& a)
{
  double m = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      m = std::max(m, std::abs(a(i, j)));
  return m;
}

// For doubles pick the largest pivot in the column; for rationals any
// nonzero entry works, prefer the shortest representation to slow
// coefficient growth.
inline Eigen::Index pick_pivot(const MatQ& a, Eigen::Index row0, Eigen::Index col)
{
  Eigen::Index best = -1;
  size_t best_size = 0;
  for (Eigen::Index i = row0; i < a.rows(); ++i) {
    if (a(i, col) == 0) continue;
    size_t sz = mpz_size(a(i, col).get_num().get_mpz_t()) +
                mpz_size(a(i, col).get_den().get_mpz_t());
    if (best < 0 || sz < best_size) {
      best = i;
      best_size = sz;
    }
  }
  return best;
}

inline Eigen::Index pick_pivot(const Eigen::MatrixXd& a, Eigen::Index row0,
                               Eigen::Index col)
{
  Eigen::Index best = -1;
  double best_mag = 0;
  for (Eigen::Index i = row0; i < a.rows(); ++i) {
    double m = std::abs(a(i, col));
    if (m > best_mag) {
      best_mag = m;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

/// Reduced row echelon form, in place semantics by value.
/// Returns the echelon matrix and fills `pivot_cols` (one per pivot row).
template <typename Mat>
Mat rref(Mat a, std::vector<Eigen::Index>* pivot_cols = nullptr)
{
  using Scalar = typename Mat::Scalar;
  const Scalar scale = detail::pivot_scale(a);
  if (pivot_cols) pivot_cols->clear();
  Eigen::Index row = 0;
  for (Eigen::Index col = 0; col < a.cols() && row < a.rows(); ++col) {
    Eigen::Index piv = detail::pick_pivot(a, row, col);
    if (piv < 0 || detail::pivot_is_zero(Scalar(a(piv, col)), scale)) continue;
    a.row(row).swap(a.row(piv));
    Scalar inv = Scalar(1) / a(row, col);
    a.row(row) *= inv;
    a(row, col) = Scalar(1);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (i == row) continue;
      if (a(i, col) != Scalar(0)) {
        a.row(i) -= a(i, col) * a.row(row);
        a(i, col) = Scalar(0);
      }
    }
    if (pivot_cols) pivot_cols->push_back(col);
    ++row;
  }
  return a;
}

template <typename Mat>
Eigen::Index rank(const Mat& a)
{
  std::vector<Eigen::Index> piv;
  rref(a, &piv);
  return static_cast<Eigen::Index>(piv.size());
}

/// Columns span ker(a).  Basis is the standard rref null basis, so the
/// result is deterministic.
template <typename Mat>
Mat nullspace(const Mat& a)
{
  using Scalar = typename Mat::Scalar;
  std::vector<Eigen::Index> piv;
  Mat r = rref(a, &piv);
  const Eigen::Index n = a.cols();
  std::vector<bool> is_pivot(n, false);
  for (auto c : piv) is_pivot[c] = true;
  std::vector<Eigen::Index> free_cols;
  for (Eigen::Index c = 0; c < n; ++c)
    if (!is_pivot[c]) free_cols.push_back(c);
  Mat basis = Mat::Zero(n, static_cast<Eigen::Index>(free_cols.size()));
  for (size_t j = 0; j < free_cols.size(); ++j) {
    basis(free_cols[j], static_cast<Eigen::Index>(j)) = Scalar(1);
    for (size_t i = 0; i < piv.size(); ++i)
      basis(piv[i], static_cast<Eigen::Index>(j)) =
          -r(static_cast<Eigen::Index>(i), free_cols[j]);
  }
  return basis;
}

/// Solve a x = b for a consistent (possibly overdetermined) system.
/// Throws InconsistentSystem if no solution exists, SingularMatrix if the
/// solution is not unique and `require_unique` is set.
template <typename Mat, typename Vec>
Vec solve(const Mat& a, const Vec& b, bool require_unique = true)
{
  using Scalar = typename Mat::Scalar;
  Mat aug(a.rows(), a.cols() + 1);
  aug.leftCols(a.cols()) = a;
  aug.col(a.cols()) = b;
  std::vector<Eigen::Index> piv;
  Mat r = rref(aug, &piv);
  for (auto c : piv)
    if (c == a.cols()) throw InconsistentSystem("solve: inconsistent system");
  if (require_unique && static_cast<Eigen::Index>(piv.size()) != a.cols())
    throw SingularMatrix("solve: solution not unique");
  (void)sizeof(Scalar);
  Vec x = Vec::Zero(a.cols());  // free variables, if allowed, stay zero
  for (size_t i = 0; i < piv.size(); ++i)
    x(piv[i]) = r(static_cast<Eigen::Index>(i), a.cols());
  return x;
}

/// Solve a X = B for all right hand sides at once (consistent systems).
template <typename Mat>
Mat solve_matrix(const Mat& a, const Mat& b, bool require_unique = true)
{
  Mat aug(a.rows(), a.cols() + b.cols());
  aug.leftCols(a.cols()) = a;
  aug.rightCols(b.cols()) = b;
  std::vector<Eigen::Index> piv;
  Mat r = rref(aug, &piv);
  Eigen::Index arank = 0;
  for (auto c : piv) {
    if (c < a.cols())
      ++arank;
    else
      throw InconsistentSystem("solve_matrix: inconsistent system");
  }
  if (require_unique && arank != a.cols())
    throw SingularMatrix("solve_matrix: solution not unique");
  Mat x = Mat::Zero(a.cols(), b.cols());
  for (size_t i = 0; i < piv.size(); ++i)
    x.row(piv[i]) =
        r.block(static_cast<Eigen::Index>(i), a.cols(), 1, b.cols());
  return x;
}

template <typename Mat>
Mat inverse(const Mat& a)
{
  if (a.rows() != a.cols()) throw SingularMatrix("inverse: not square");
  Mat aug(a.rows(), 2 * a.cols());
  aug.leftCols(a.cols()) = a;
  aug.rightCols(a.cols()) = Mat::Identity(a.rows(), a.cols());
  std::vector<Eigen::Index> piv;
  Mat r = rref(aug, &piv);
  if (static_cast<Eigen::Index>(piv.size()) != a.cols() ||
      (piv.size() > 0 && piv.back() >= a.cols()))
    throw SingularMatrix("inverse: singular matrix");
  return r.rightCols(a.cols());
}

/// Exact determinant by elimination (rational only in practice).
inline Rational determinant(MatQ a)
{
  if (a.rows() != a.cols()) throw SingularMatrix("determinant: not square");
  Rational det(1);
  const Eigen::Index n = a.rows();
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index piv = detail::pick_pivot(a, col, col);
    if (piv < 0) return Rational(0);
    if (piv != col) {
      a.row(col).swap(a.row(piv));
      det = -det;
    }
    det *= a(col, col);
    Rational inv = Rational(1) / a(col, col);
    for (Eigen::Index i = col + 1; i < n; ++i) {
      if (a(i, col) != 0) {
        Rational f = a(i, col) * inv;
        for (Eigen::Index j = col; j < n; ++j) a(i, j) -= f * a(col, j);
      }
    }
  }
  return det;
}

/// Greedy maximal independent subset of the columns of `gen`, in order.
/// Returns the kept column indices; the span equals span(gen).
template <typename Mat>
std::vector<Eigen::Index> independent_columns(const Mat& gen)
{
  using Scalar = typename Mat::Scalar;
  const Scalar scale = detail::pivot_scale(gen);
  std::vector<Eigen::Index> kept;
  Mat work = gen;
  std::vector<Eigen::Index> pivot_row_of;  // per kept column
  std::vector<Eigen::Index> used_rows;
  for (Eigen::Index c = 0; c < gen.cols(); ++c) {
    // Reduce column c against previously kept pivots.
    for (size_t k = 0; k < kept.size(); ++k) {
      Eigen::Index pr = pivot_row_of[k];
      Scalar f = work(pr, c);
      if (f != Scalar(0)) work.col(c) -= f * work.col(kept[k]);
    }
    Eigen::Index pr = -1;
    for (Eigen::Index i = 0; i < gen.rows(); ++i) {
      bool used = false;
      for (auto u : used_rows)
        if (u == i) used = true;
      if (used) continue;
      if (!detail::pivot_is_zero(Scalar(work(i, c)), scale)) {
        pr = i;
        break;
      }
    }
    if (pr < 0) continue;
    work.col(c) /= work(pr, c);
    kept.push_back(c);
    pivot_row_of.push_back(pr);
    used_rows.push_back(pr);
  }
  return kept;
}

/// Is v in the column span of basis?  Exact for rationals.
template <typename Mat, typename Vec>
bool in_span(const Mat& basis, const Vec& v)
{
  Mat aug(basis.rows(), basis.cols() + 1);
  aug.leftCols(basis.cols()) = basis;
  aug.col(basis.cols()) = v;
  return rank(aug) == rank(basis);
}

/// span(sub) subseteq span(big)?
template <typename Mat>
bool span_contained(const Mat& sub, const Mat& big)
{
  Mat aug(big.rows(), big.cols() + sub.cols());
  aug.leftCols(big.cols()) = big;
  aug.rightCols(sub.cols()) = sub;
  return rank(aug) == rank(big);
}

template <typename Mat>
bool spans_equal(const Mat& a, const Mat& b)
{
  return span_contained(a, b) && span_contained(b, a);
}

/// Intersection of two column spans, as a basis matrix.
inline MatQ span_intersection(const MatQ& a, const MatQ& b)
{
  if (a.cols() == 0 || b.cols() == 0) return MatQ::Zero(a.rows(), 0);
  MatQ stacked(a.rows(), a.cols() + b.cols());
  stacked.leftCols(a.cols()) = a;
  stacked.rightCols(b.cols()) = -b;
  MatQ ker = nullspace(stacked);
  MatQ inter = a * ker.topRows(a.cols());
  std::vector<Eigen::Index> keep = independent_columns(inter);
  MatQ out(a.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t j = 0; j < keep.size(); ++j) out.col(j) = inter.col(keep[j]);
  return out;
}

}  // namespace fes

#endif
