#include <cmath>
#include <random>

#include "doctest.h"
#include "pftopo/errors.hpp"
#include "pftopo/levelset.hpp"
#include "pftopo/material.hpp"
#include "pftopo/verify.hpp"

using namespace pftopo;

namespace {

MaterialParams steel() {
  MaterialParams p;
  p.bulk = 175000.0;
  p.shear = 80760.0;
  p.hardening = 200.0;
  p.yield_stress = 543.0;
  p.psi_c = 13.0;
  p.l_f = 0.1;
  return p;
}

Matrix3 random_sym(std::mt19937& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix3 a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = u(rng);
  return 0.5 * (a + a.transpose());
}

Matrix3 plane(const Matrix3& a) {
  Matrix3 b = a;
  b(0, 2) = b(2, 0) = b(1, 2) = b(2, 1) = b(2, 2) = 0.0;
  return b;
}

double dev_sq(const Matrix3& e) {
  const Matrix3 dev = e - e.trace() / 3.0 * Matrix3::Identity();
  return (dev.array() * dev.array()).sum();
}

}  // namespace

TEST_CASE("degradation function") {
  CHECK(degradation_g(0.0, 1e-8) == 1.0);
  CHECK(degradation_g(1.0, 1e-8) == 1e-8);
  CHECK(degradation_g(0.5, 0.0) == 0.25);
  CHECK_THROWS_AS(degradation_g(1.5, 1e-8), InvalidArgument);
  const double h = 1e-6;
  CHECK(degradation_g_prime(0.3, 1e-3) ==
        doctest::Approx((degradation_g(0.3 + h, 1e-3) - degradation_g(0.3 - h, 1e-3)) / (2 * h)).epsilon(1e-8));
}

TEST_CASE("transition function") {
  CHECK(transition_f(0.7, 1e-8) == 1.0);
  CHECK(transition_f(-0.3, 1e-8) == 1e-8);
  CHECK(transition_f(0.0, 1e-8) == 1.0);
  for (double phi : {-1.0, -0.4, 0.0, 0.2, 1.0})
    CHECK(transition_f(phi, 1e-8) == (1.0 - 1e-8) * heaviside_exact(phi) + 1e-8);
}

TEST_CASE("energy split") {
  const MaterialParams p = steel();
  const auto [zp, zm] = energy_split(Matrix3::Zero(), p);
  CHECK(zp == 0.0);
  CHECK(zm == 0.0);
  const auto [tp, tm] = energy_split(1e-3 * Matrix3::Identity(), p);
  CHECK(tm == 0.0);
  CHECK(tp > 0.0);
  const auto [cp, cm] = energy_split(-1e-3 * Matrix3::Identity(), p);
  CHECK(cp == 0.0);
  CHECK(cm > 0.0);

  std::mt19937 rng(11);
  for (int k = 0; k < 200; ++k) {
    const Matrix3 e = random_sym(rng, 1e-2);
    const auto [pp, pm] = energy_split(e, p);
    const double ref = 0.5 * p.bulk * e.trace() * e.trace() + p.shear * dev_sq(e);
    CHECK(std::abs(pp + pm - ref) <= 1e-12 * std::max(1.0, ref));
  }
}

TEST_CASE("stress is the gradient of the elastic energy") {
  MaterialParams p = steel();
  p.yield_stress = 1e16;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ud(0.0, 0.9);
  for (int k = 0; k < 50; ++k) {
    const Matrix3 e = random_sym(rng, 1e-3);
    const double d = ud(rng);
    const double g = degradation_g(d, p.kappa);
    const StressResult r = return_map(e, QuadState{}, d, 1.0, p);
    auto W = [&](const Matrix3& x) {
      const auto [pp, pm] = energy_split(x, p);
      return g * pp + pm;
    };
    const double h = 1e-9;
    double err = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        Matrix3 dp = e, dm = e;
        dp(i, j) += h;
        dm(i, j) -= h;
        const double fd = (W(dp) - W(dm)) / (2 * h);
        err = std::max(err, std::abs(fd - r.sigma(i, j)));
      }
    CHECK(err <= 1e-6 * r.sigma.norm());
  }
}

TEST_CASE("elastic trial keeps the internal state") {
  const MaterialParams p = steel();
  QuadState s;
  s.alpha = 0.01;
  s.eps_p(0, 0) = 1e-4;
  s.eps_p(1, 1) = -1e-4;
  const Matrix3 e = s.eps_p + 1e-5 * Matrix3::Identity();
  const StressResult r = return_map(e, s, 0.0, 1.0, p);
  CHECK_FALSE(r.plastic);
  CHECK(r.new_state.alpha == s.alpha);
  CHECK(r.new_state.eps_p == s.eps_p);
  CHECK(r.new_state.lambda_p == 0.0);

  StressResult elastic = r;
  elastic.plastic = false;
  elastic.delta_gamma = 0.0;
  CHECK((r.tangent - consistent_tangent(elastic, p)).norm() == 0.0);
}

TEST_CASE("void points stay elastic") {
  const MaterialParams p = steel();
  Matrix3 e = Matrix3::Zero();
  e(0, 0) = 0.5;
  const StressResult r = return_map(e, QuadState{}, 0.0, -0.5, p);
  CHECK_FALSE(r.plastic);
  CHECK(r.new_state.alpha == 0.0);
  CHECK(r.new_state.eps_p.isZero());
}

TEST_CASE("uniaxial strain reproduces the bilinear response") {
  const MaterialParams p = steel();
  const double K = p.bulk, mu = p.shear, h = p.hardening, sy = p.yield_stress;
  const double e_yield = sy / (2.0 * mu);
  QuadState state;
  for (int n = 1; n <= 60; ++n) {
    const double e = n * e_yield / 20.0;
    Matrix3 eps = Matrix3::Zero();
    eps(0, 0) = e;
    const StressResult r = return_map(eps, state, 0.0, 1.0, p);
    double analytic = (K + 4.0 * mu / 3.0) * e;
    if (e > e_yield) analytic -= 2.0 * mu * (2.0 * mu * e - sy) / (3.0 * mu + h);
    const double tol = e > e_yield ? 1e-6 : 1e-8;
    CHECK(std::abs(r.sigma(0, 0) - analytic) <= tol * std::abs(analytic));
    CHECK(r.yield_residual <= 1e-8 * sy);
    CHECK(std::abs(r.new_state.eps_p.trace()) <= 1e-10);
    CHECK(r.delta_gamma >= 0.0);
    CHECK(std::abs(r.delta_gamma * r.yield_residual) <= 1e-10);
    state = r.new_state;
  }
  const double slope_analytic = K + 4.0 * mu / 3.0 - 4.0 * mu * mu / (3.0 * mu + h);
  Matrix3 a = Matrix3::Zero(), b = Matrix3::Zero();
  a(0, 0) = 2.0 * e_yield;
  b(0, 0) = 2.5 * e_yield;
  const double slope = (return_map(b, QuadState{}, 0.0, 1.0, p).sigma(0, 0) -
                        return_map(a, QuadState{}, 0.0, 1.0, p).sigma(0, 0)) /
                       (0.5 * e_yield);
  CHECK(slope == doctest::Approx(slope_analytic).epsilon(1e-8));
}

TEST_CASE("yield residual and KKT after random returns") {
  const MaterialParams p = steel();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    QuadState s;
    s.alpha = 0.02 * ud(rng);
    const Matrix3 ep = random_sym(rng, 2e-3);
    s.eps_p = ep - ep.trace() / 3.0 * Matrix3::Identity();
    const Matrix3 e = random_sym(rng, 1e-2);
    const double d = ud(rng);
    const StressResult r = return_map(e, s, d, 1.0, p);
    CHECK(r.yield_residual <= 1e-8 * p.yield_stress);
    CHECK(std::abs(r.new_state.eps_p.trace()) <= 1e-10);
    CHECK(r.new_state.lambda_p >= 0.0);
    CHECK(std::abs(r.new_state.lambda_p * r.yield_residual) <= 1e-10);
  }
}

TEST_CASE("consistent tangent against finite differences") {
  const MaterialParams p = steel();
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> ud(0.0, 0.8);
  std::vector<TangentSample> samples;
  for (int k = 0; k < 100; ++k) {
    TangentSample s;
    s.eps = plane(random_sym(rng, 1e-2));
    s.d = ud(rng);
    samples.push_back(s);
    TangentSample el;
    el.eps = plane(random_sym(rng, 1e-3)) * (p.yield_stress / p.shear);
    el.eps *= 0.05;
    el.d = ud(rng);
    samples.push_back(el);
  }
  const TangentCheckReport rep = fd_tangent_check(samples, p);
  CHECK(rep.plastic_samples >= 90);
  CHECK(rep.elastic_samples >= 90);
  CHECK(rep.max_rel_error_plastic < 1e-5);
  CHECK(rep.max_rel_error_elastic < 1e-7);
}

TEST_CASE("fully broken tensile tangent keeps only the compressive floor") {
  MaterialParams p = steel();
  p.yield_stress = 1e16;
  Matrix3 e = 1e-3 * Matrix3::Identity();
  e(0, 1) = e(1, 0) = 5e-4;
  const StressResult broken = return_map(e, QuadState{}, 1.0, 1.0, p);
  const StressResult intact = return_map(e, QuadState{}, 0.0, 1.0, p);
  CHECK(broken.tangent.norm() <= p.kappa * intact.tangent.norm() * (1 + 1e-12));
}

TEST_CASE("infinite yield stress is brittle") {
  MaterialParams p = steel();
  p.yield_stress = 1e16;
  std::mt19937 rng(1);
  for (int k = 0; k < 100; ++k) {
    const StressResult r = return_map(random_sym(rng, 0.5), QuadState{}, 0.0, 1.0, p);
    CHECK(r.new_state.alpha == 0.0);
    CHECK_FALSE(r.plastic);
  }
}

TEST_CASE("non-finite strain is rejected") {
  Matrix3 e = Matrix3::Zero();
  e(0, 0) = std::nan("");
  CHECK_THROWS_AS(return_map(e, QuadState{}, 0.0, 1.0, steel()), NumericalFailure);
}

TEST_CASE("voigt conversions roundtrip") {
  std::mt19937 rng(2);
  const Matrix3 e = random_sym(rng, 1.0);
  CHECK((voigt_to_strain(strain_to_voigt(e)) - e).norm() < 1e-15);
  CHECK(strain_to_voigt(e)[3] == doctest::Approx(2.0 * e(0, 1)));
  CHECK(stress_to_voigt(e)[3] == e(0, 1));
}
