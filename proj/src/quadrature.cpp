#include "fes/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace fes {

QuadRule gauss_legendre(int n)
{
  if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1");
  // Nodes on [-1,1] by Newton iteration from Chebyshev initial guesses.
  VecD x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      if (n == 1) p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double pn = (n == 1) ? t : p1;
      double dpn = n * (t * pn - p0) / (t * t - 1.0);
      double dt = pn / dpn;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dpn = n * (t * p1 - p0) / (t * t - 1.0);
    x(i) = t;
    w(i) = 2.0 / ((1.0 - t * t) * dpn * dpn);
  }
  QuadRule rule;
  rule.points = MatD(1, n);
  rule.weights = VecD(n);
  for (int i = 0; i < n; ++i) {
    rule.points(0, n - 1 - i) = 0.5 * (x(i) + 1.0);
    rule.weights(n - 1 - i) = 0.5 * w(i);
  }
  return rule;
}

QuadRule simplex_rule(int dim, int degree)
{
  if (dim < 1 || dim > 3)
    throw std::invalid_argument("simplex_rule: dimension 1..3");
  if (degree < 0) degree = 0;
  // Duffy transform adds dim-1 to the per-axis polynomial degree.
  const int n = (degree + dim) / 2 + 1;
  QuadRule g = gauss_legendre(n);
  const Eigen::Index total = static_cast<Eigen::Index>(std::pow(n, dim));
  QuadRule rule;
  rule.points = MatD(dim, total);
  rule.weights = VecD(total);
  Eigen::Index idx = 0;
  if (dim == 1) {
    for (int i = 0; i < n; ++i) {
      rule.points(0, idx) = g.points(0, i);
      rule.weights(idx) = g.weights(i);
      ++idx;
    }
  } else if (dim == 2) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double x1 = g.points(0, i), x2 = g.points(0, j);
        double t1 = x1, t2 = x2 * (1.0 - x1);
        rule.points(0, idx) = t1;
        rule.points(1, idx) = t2;
        rule.weights(idx) = g.weights(i) * g.weights(j) * (1.0 - x1);
        ++idx;
      }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double x1 = g.points(0, i), x2 = g.points(0, j), x3 = g.points(0, k);
          double t1 = x1;
          double t2 = x2 * (1.0 - x1);
          double t3 = x3 * (1.0 - x1) * (1.0 - x2);
          rule.points(0, idx) = t1;
          rule.points(1, idx) = t2;
          rule.points(2, idx) = t3;
          rule.weights(idx) = g.weights(i) * g.weights(j) * g.weights(k) *
                              (1.0 - x1) * (1.0 - x1) * (1.0 - x2);
          ++idx;
        }
  }
  return rule;
}

}  // namespace fes
