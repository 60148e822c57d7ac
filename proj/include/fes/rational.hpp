// Exact rational scalar type and its Eigen adaptor.
//
// All structural identities of the library (dd = 0, rank computations,
// null spaces, Stokes) are asserted in exact arithmetic; mpq_class is the
// scalar that makes those checks decidable.

#ifndef FES_RATIONAL_HPP
#define FES_RATIONAL_HPP

#include <gmpxx.h>

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace Eigen {

template <>
struct NumTraits<mpq_class> : GenericNumTraits<mpq_class> {
  typedef mpq_class Real;
  typedef mpq_class NonInteger;
  typedef mpq_class Nested;

  static inline Real epsilon() { return Real(0); }
  static inline Real dummy_precision() { return Real(0); }
  static inline int digits10() { return 0; }

  enum {
    IsInteger = 0,
    IsSigned = 1,
    IsComplex = 0,
    RequireInitialization = 1,
    ReadCost = 6,
    AddCost = 150,
    MulCost = 100,
  };
};

}  // namespace Eigen

namespace fes {

using Rational = mpq_class;

using MatQ = Eigen::Matrix<Rational, Eigen::Dynamic, Eigen::Dynamic>;
using VecQ = Eigen::Matrix<Rational, Eigen::Dynamic, 1>;
using RowVecQ = Eigen::Matrix<Rational, 1, Eigen::Dynamic>;

using MatD = Eigen::MatrixXd;
using VecD = Eigen::VectorXd;

/// Parse "p/q" or a plain integer string.
inline Rational parse_rational(const std::string& s)
{
  if (s.empty()) throw std::invalid_argument("empty rational literal");
  Rational r;
  if (r.set_str(s, 10) != 0)
    throw std::invalid_argument("bad rational literal: " + s);
  if (r.get_den() == 0) throw std::invalid_argument("zero denominator: " + s);
  r.canonicalize();
  return r;
}

inline std::string to_string(const Rational& r) { return r.get_str(); }

inline double to_double(const Rational& r) { return r.get_d(); }

inline Rational rational_from_long(long num, long den = 1)
{
  Rational r(num, den);
  r.canonicalize();
  return r;
}

/// n! as an exact rational.
inline Rational factorial(unsigned n)
{
  mpz_class f;
  mpz_fac_ui(f.get_mpz_t(), n);
  return Rational(f);
}

/// Binomial coefficient C(n, k), zero outside the triangle.
inline Rational binomial(long n, long k)
{
  if (k < 0 || k > n || n < 0) return Rational(0);
  mpz_class b;
  mpz_bin_uiui(b.get_mpz_t(), static_cast<unsigned long>(n),
               static_cast<unsigned long>(k));
  return Rational(b);
}

inline MatD to_double(const MatQ& a)
{
  MatD out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(i, j) = a(i, j).get_d();
  return out;
}

inline VecD to_double(const VecQ& a)
{
  VecD out(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out(i) = a(i).get_d();
  return out;
}

}  // namespace fes

#endif
