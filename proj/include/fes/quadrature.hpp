// Quadrature rules for the floating-point (weighted) paths.

#ifndef FES_QUADRATURE_HPP
#define FES_QUADRATURE_HPP

#include "fes/rational.hpp"

namespace fes {

struct QuadRule {
  MatD points;   // dim x n
  VecD weights;  // n
  Eigen::Index size() const { return weights.size(); }
};

/// Gauss-Legendre rule on [0, 1], exact for degree 2n-1.
QuadRule gauss_legendre(int n);

/// Rule on the standard simplex {t >= 0, sum t <= 1} of the given
/// dimension (1..3), exact for polynomials of the given total degree.
/// Built by the Duffy transform from tensor Gauss rules.
QuadRule simplex_rule(int dim, int degree);

}  // namespace fes

#endif
