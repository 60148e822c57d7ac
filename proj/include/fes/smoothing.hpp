// Moment-matched smoothing kernels and the pullback-averaging regularizer
// R[Phi]u = int psi(y) Phi_y^* u dy with Phi_y(x) = x + eps phi(x) y.
//
// Kernels reproduce polynomials up to degree p + d through vanishing
// radial moments; coefficients are solved exactly and evaluated in
// doubles.  All integrals here are quadrature based.

#ifndef FES_SMOOTHING_HPP
#define FES_SMOOTHING_HPP

#include <functional>

#include "fes/complex.hpp"
#include "fes/polyform.hpp"
#include "fes/quadrature.hpp"

namespace fes {

struct IllConditionedMoments : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Radial kernel psi(y) = c P(|y|^2) (1 - |y|^2)^s on the unit ball.
/// P is solved exactly from the moment conditions; the kernel takes
/// negative values once p + d >= 2.
class Kernel {
 public:
  int dim() const { return dim_; }
  int preserved_degree() const { return degree_; }
  int bump_power() const { return bump_; }

  double radial(double r) const;
  double operator()(const VecD& y) const;

  /// Exact polynomial radial profile (before the 1/sphere normalization).
  const std::vector<Rational>& coefficients() const { return coeffs_; }

  friend Kernel make_kernel(int p, int d);

 private:
  int dim_ = 1;
  int degree_ = 0;
  int bump_ = 5;
  std::vector<Rational> coeffs_;  // of r^{2j}
  double norm_ = 1.0;             // 1 / (sphere measure factor)
};

/// Moment-matched kernel for polynomial reproduction of degree p on R^d.
Kernel make_kernel(int p, int d);

/// max over monomials of total degree <= max_degree of
/// | int psi(y) y^alpha dy - delta_{alpha,0} |, by quadrature.
double kernel_moment_residual(const Kernel& psi, int max_degree);

/// Quadrature nodes and weights over the unit ball (polar product rules).
struct BallRule {
  MatD points;
  VecD weights;
  Eigen::Index size() const { return weights.size(); }
};
BallRule ball_rule(int d, int radial_points, int angular_points);
BallRule default_ball_rule(const Kernel& psi);

/// A k-form with pointwise-evaluable coefficients on a box domain.
struct SampledForm {
  int dim = 0;
  int degree = 0;
  std::function<double(AltMask, const VecD&)> coeff;
  std::function<double(AltMask, const VecD&)> d_coeff;  // optional
  VecD box_lo, box_hi;

  static SampledForm from_poly(const PolyForm& u, VecD lo, VecD hi);
};

struct ScaleField {
  std::function<double(const VecD&)> phi;
  std::function<VecD(const VecD&)> grad;  // may be empty: finite differences

  VecD gradient(const VecD& x) const;
  static ScaleField constant(int d, double value);
};

/// The regularized k-covector at x (coefficients per alternating index).
std::map<AltMask, double> regularize(const SampledForm& u,
                                     const ScaleField& scale, double eps,
                                     const Kernel& psi, const VecD& x,
                                     const BallRule& rule);

/// max over sample points and components of d(Ru) - R(du), with d(Ru)
/// computed by central differences of step fd_step.
double commutation_residual(const SampledForm& u, const ScaleField& scale,
                            double eps, const Kernel& psi,
                            const std::vector<VecD>& points, double fd_step,
                            const BallRule& rule);

/// Smooth positive field comparable to the local mesh size, built by
/// moment-kernel smoothing of the piecewise cell-diameter function.
/// c1 and c2 receive the sampled bounds of phi(x)/h_T per top cell.
ScaleField mesh_scale_field(const Complex& cx, double* c1 = nullptr,
                            double* c2 = nullptr);

/// Per-top-cell verdicts of the locality condition: every sampled point
/// of the eps phi(x)-ball around the cell that lies in the domain belongs
/// to the cell's macroelement (the union of cells touching it).  The
/// report leaves the choice of eps to the caller.
std::map<std::string, bool> epsilon_locality_report(const Complex& cx,
                                                    const ScaleField& scale,
                                                    double eps);

}  // namespace fes

#endif
