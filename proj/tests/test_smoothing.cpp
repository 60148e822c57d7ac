#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fes/smoothing.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fes;

namespace {

VecD vec2(double a, double b)
{
  VecD v(2);
  v << a, b;
  return v;
}

SampledForm box_form(const PolyForm& u, double lo = -10, double hi = 10)
{
  VecD l = VecD::Constant(u.dim(), lo);
  VecD h = VecD::Constant(u.dim(), hi);
  return SampledForm::from_poly(u, l, h);
}

}  // namespace

TEST_CASE("kernel moments vanish up to degree p + d")
{
  for (int d = 1; d <= 2; ++d)
    for (int p = 0; p <= 3; ++p) {
      Kernel psi = make_kernel(p, d);
      CHECK(kernel_moment_residual(psi, p + d) <= 1e-10);
    }
  // d = 1, p = 2: second and third moments vanish
  Kernel psi = make_kernel(2, 1);
  CHECK(kernel_moment_residual(psi, 3) <= 1e-10);
}

TEST_CASE("kernel normalization is exact to quadrature accuracy")
{
  for (int d = 1; d <= 3; ++d) {
    Kernel psi = make_kernel(1, d);
    BallRule rule = default_ball_rule(psi);
    double total = 0;
    for (Eigen::Index q = 0; q < rule.size(); ++q)
      total += rule.weights(q) * psi(rule.points.col(q));
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("regularizer reproduces constants with flat scale fields")
{
  Kernel psi = make_kernel(1, 2);
  BallRule rule = default_ball_rule(psi);
  ScaleField flat = ScaleField::constant(2, 1.0);
  PolyForm u = constant_form(2, 1, Rational(3)) +
               constant_form(2, 2, Rational(-2));
  SampledForm su = box_form(u);
  auto r = regularize(su, flat, 0.05, psi, vec2(0.3, -0.4), rule);
  CHECK(std::abs(r.at(1) - 3.0) <= 1e-10);
  CHECK(std::abs(r.at(2) + 2.0) <= 1e-10);
}

TEST_CASE("polynomial reproduction at level zero")
{
  for (int p = 1; p <= 3; ++p) {
    Kernel psi = make_kernel(p, 2);
    BallRule rule = default_ball_rule(psi);
    // a genuinely varying scale field with analytic gradient
    ScaleField scale;
    scale.phi = [](const VecD& x) {
      return 1.0 + 0.25 * std::sin(x(0)) * std::cos(x(1));
    };
    scale.grad = [](const VecD& x) {
      VecD g(2);
      g << 0.25 * std::cos(x(0)) * std::cos(x(1)),
          -0.25 * std::sin(x(0)) * std::sin(x(1));
      return g;
    };
    testing::RatRng rng(500 + static_cast<std::uint64_t>(p));
    for (int k = 0; k <= 2; ++k) {
      PolyForm u = rng.form(2, k, p);
      SampledForm su = box_form(u);
      for (int trial = 0; trial < 10; ++trial) {
        VecD x = vec2(-1.0 + 0.2 * trial, 0.7 - 0.15 * trial);
        auto r = regularize(su, scale, 0.05, psi, x, rule);
        auto exact = u.evaluate(x);
        for (const auto& [mask, val] : r) {
          double want = exact.count(mask) ? exact.at(mask) : 0.0;
          CHECK(std::abs(val - want) <= 1e-8);
        }
      }
    }
  }
}

TEST_CASE("linearity")
{
  Kernel psi = make_kernel(2, 2);
  BallRule rule = default_ball_rule(psi);
  ScaleField flat = ScaleField::constant(2, 0.7);
  testing::RatRng rng(808);
  PolyForm u = rng.form(2, 1, 4), v = rng.form(2, 1, 4);
  SampledForm su = box_form(u), sv = box_form(v);
  PolyForm w = Rational(2) * u + Rational(-3) * v;
  SampledForm sw = box_form(w);
  VecD x = vec2(0.2, 0.1);
  auto ru = regularize(su, flat, 0.1, psi, x, rule);
  auto rv = regularize(sv, flat, 0.1, psi, x, rule);
  auto rw = regularize(sw, flat, 0.1, psi, x, rule);
  for (const auto& [mask, val] : rw)
    CHECK(std::abs(val - (2 * ru.at(mask) - 3 * rv.at(mask))) <= 1e-10);
}

TEST_CASE("locality: perturbations outside the ball change nothing")
{
  Kernel psi = make_kernel(1, 2);
  BallRule rule = default_ball_rule(psi);
  ScaleField flat = ScaleField::constant(2, 1.0);
  const double eps = 0.05;
  VecD x = vec2(0.0, 0.0);
  PolyForm u = monomial_form(2, 1, Monomial{2, 1}, Rational(1));
  SampledForm su = box_form(u);
  SampledForm perturbed = su;
  perturbed.coeff = [&, base = su.coeff](AltMask mask, const VecD& z) {
    if (z.norm() > eps * 1.0 + 1e-12) return base(mask, z) + 100.0;
    return base(mask, z);
  };
  auto a = regularize(su, flat, eps, psi, x, rule);
  auto b = regularize(perturbed, flat, eps, psi, x, rule);
  for (const auto& [mask, val] : a) CHECK(val == b.at(mask));
}

TEST_CASE("domain checks")
{
  Kernel psi = make_kernel(1, 2);
  BallRule rule = default_ball_rule(psi);
  ScaleField flat = ScaleField::constant(2, 1.0);
  PolyForm u = constant_form(2, 1, Rational(1));
  SampledForm su = SampledForm::from_poly(u, vec2(-1, -1), vec2(1, 1));
  CHECK_THROWS_AS(regularize(su, flat, 0.5, psi, vec2(0.9, 0.0), rule),
                  DomainExceeded);
}

TEST_CASE("commutation residual: polynomial and sinusoidal fixtures")
{
  Kernel psi = make_kernel(2, 2);
  BallRule rule = default_ball_rule(psi);
  ScaleField flat = ScaleField::constant(2, 1.0);

  // polynomial: both sides equal du up to quadrature and FD error
  testing::RatRng rng(909);
  PolyForm u = rng.form(2, 0, 2);
  SampledForm su = box_form(u);
  std::vector<VecD> pts{vec2(0.1, 0.2), vec2(-0.3, 0.4), vec2(0.5, -0.1)};
  CHECK(commutation_residual(su, flat, 0.05, psi, pts, 1e-4, rule) <= 1e-6);

  // sinusoidal coefficients with analytic exterior derivative
  SampledForm sin_form;
  sin_form.dim = 2;
  sin_form.degree = 1;
  sin_form.box_lo = VecD::Constant(2, -10.0);
  sin_form.box_hi = VecD::Constant(2, 10.0);
  sin_form.coeff = [](AltMask mask, const VecD& x) {
    if (mask == 1) return std::sin(2 * M_PI * x(0)) * std::cos(2 * M_PI * x(1));
    return 0.0;  // g = 0
  };
  sin_form.d_coeff = [](AltMask mask, const VecD& x) {
    // d(f dx) = -f_y dx^dy
    (void)mask;
    return 2 * M_PI * std::sin(2 * M_PI * x(0)) * std::sin(2 * M_PI * x(1));
  };
  CHECK(commutation_residual(sin_form, flat, 0.05, psi, pts, 1e-4, rule) <=
        1e-5);

  // constants: residual sits at the FD noise floor
  PolyForm c = constant_form(2, 1, Rational(2));
  SampledForm sc = box_form(c);
  CHECK(commutation_residual(sc, flat, 0.05, psi, pts, 1e-4, rule) <= 1e-9);
}

TEST_CASE("scaling covariance under an affine map")
{
  // R[Phi] u = (sigma^*)^{-1} R[sigma^{-1} Phi sigma] sigma^* u
  // with sigma(x) = h x + b and Phi_y(x) = x + eps phi(x) y.
  Kernel psi = make_kernel(1, 2);
  BallRule rule = default_ball_rule(psi);
  const double h = 0.5;
  VecD b = vec2(0.3, -0.2);
  const double eps = 0.04;
  ScaleField scale;
  scale.phi = [](const VecD& x) { return 1.0 + 0.1 * x(0); };
  scale.grad = [](const VecD&) {
    VecD g(2);
    g << 0.1, 0.0;
    return g;
  };
  // pulled-back data: sigma^* u and the conjugated scale field
  ScaleField pulled;
  pulled.phi = [&, b](const VecD& xhat) {
    VecD x = h * xhat + b;
    return scale.phi(x) / h;  // sigma^{-1} Phi sigma has phi/h
  };
  pulled.grad = [&, b](const VecD& xhat) {
    VecD x = h * xhat + b;
    return VecD(scale.grad(x));  // chain rule: (1/h) grad phi * h
  };
  testing::RatRng rng(77);
  PolyForm u = rng.form(2, 1, 3);
  SampledForm su = box_form(u);

  VecD xhat = vec2(0.4, 0.6);
  VecD x = h * xhat + b;
  auto lhs = regularize(su, scale, eps, psi, x, rule);

  // sigma^* u as a sampled form
  SampledForm pb;
  pb.dim = 2;
  pb.degree = 1;
  pb.box_lo = VecD::Constant(2, -100.0);
  pb.box_hi = VecD::Constant(2, 100.0);
  pb.coeff = [&, b](AltMask mask, const VecD& xh) {
    VecD z = h * xh + b;
    auto vals = u.evaluate(z);
    double v = vals.count(mask) ? vals.at(mask) : 0.0;
    return h * v;  // 1-form pullback along x = h xhat + b
  };
  auto rhs_hat = regularize(pb, pulled, eps, psi, xhat, rule);
  // push forward: (sigma^*)^{-1} divides by h for 1-forms
  for (const auto& [mask, val] : lhs)
    CHECK(std::abs(val - rhs_hat.at(mask) / h) <= 1e-9);
}

TEST_CASE("epsilon locality report against macroelements")
{
  Complex cx = fixtures::square_grid(4);
  ScaleField phi = mesh_scale_field(cx);
  auto small = epsilon_locality_report(cx, phi, 0.1);
  for (const auto& [id, ok] : small) CHECK(ok);
  // a huge epsilon reaches far outside the macroelements
  auto large = epsilon_locality_report(cx, phi, 1.5);
  bool any_fail = false;
  for (const auto& [id, ok] : large)
    if (!ok) any_fail = true;
  CHECK(any_fail);
}

TEST_CASE("mesh scale field tracks local diameters")
{
  // uniform mesh: phi is h up to smoothing tolerance
  Complex uni = fixtures::square_grid(2);
  double c1 = 0, c2 = 0;
  ScaleField phi = mesh_scale_field(uni, &c1, &c2);
  const double h = std::sqrt(2.0) / 2.0;  // diameter of each triangle
  VecD x = vec2(0.5, 0.5);
  CHECK(std::abs(phi.phi(x) - h) <= 1e-8);
  CHECK(c1 > 0);
  CHECK(c2 < 1e10);

  // graded 1D mesh with neighbor ratio 2: phi within [h/2, 2h] per cell
  std::vector<fes::VecQ> verts;
  std::vector<Rational> xs{Rational(0), Rational(1, 7), Rational(3, 7),
                           Rational(1)};
  for (const auto& v : xs) verts.push_back(fixtures::pt({v}));
  Complex graded =
      Complex::simplicial(1, verts, {{0, 1}, {1, 2}, {2, 3}});
  double g1 = 0, g2 = 0;
  ScaleField gphi = mesh_scale_field(graded, &g1, &g2);
  CHECK(g1 >= 0.5 - 1e-9);
  CHECK(g2 <= 2.0 + 1e-9);
}
