#include "pftopo/material.hpp"

#include <cmath>

#include "pftopo/errors.hpp"

namespace pftopo {

namespace {

const double kSqrt32 = std::sqrt(1.5);

Matrix3 deviator(const Matrix3& a) { return a - (a.trace() / 3.0) * Matrix3::Identity(); }

Vector6 identity_voigt() {
  Vector6 v;
  v << 1, 1, 1, 0, 0, 0;
  return v;
}

Matrix6 deviatoric_projector() {
  Matrix6 p = Matrix6::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) p(i, j) = (i == j ? 1.0 : 0.0) - 1.0 / 3.0;
  for (int i = 3; i < 6; ++i) p(i, i) = 0.5;
  return p;
}

}  // namespace

Vector6 strain_to_voigt(const Matrix3& e) {
  Vector6 v;
  v << e(0, 0), e(1, 1), e(2, 2), 2.0 * e(0, 1), 2.0 * e(1, 2), 2.0 * e(0, 2);
  return v;
}

Matrix3 voigt_to_strain(const Vector6& v) {
  Matrix3 e;
  e << v[0], 0.5 * v[3], 0.5 * v[5], 0.5 * v[3], v[1], 0.5 * v[4], 0.5 * v[5], 0.5 * v[4], v[2];
  return e;
}

Vector6 stress_to_voigt(const Matrix3& s) {
  Vector6 v;
  v << s(0, 0), s(1, 1), s(2, 2), s(0, 1), s(1, 2), s(0, 2);
  return v;
}

void MaterialParams::validate() const {
  if (!(bulk > 0) || !(shear > 0)) throw InvalidArgument("bulk and shear moduli must be > 0");
  if (!(hardening >= 0) || !(yield_stress >= 0) || !(psi_c >= 0) || !(zeta >= 0) || !(eta_f >= 0))
    throw InvalidArgument("hardening, yield_stress, psi_c, zeta, eta_f must be >= 0");
  if (!(kappa > 0) || !(kappa < 1)) throw InvalidArgument("kappa must lie in (0, 1)");
  if (!(l_f > 0)) throw InvalidArgument("l_f must be > 0");
}

double degradation_g(double d, double kappa) {
  if (!(d >= 0.0 && d <= 1.0)) throw InvalidArgument("degradation_g: d outside [0, 1]");
  return (1.0 - kappa) * (1.0 - d) * (1.0 - d) + kappa;
}

double degradation_g_prime(double d, double kappa) { return -2.0 * (1.0 - kappa) * (1.0 - d); }

double transition_from_heaviside(double heaviside, double kappa) {
  return (1.0 - kappa) * heaviside * heaviside + kappa;
}

double transition_f(double phi, double kappa) {
  return transition_from_heaviside(heaviside_exact(phi), kappa);
}

std::pair<double, double> energy_split(const Matrix3& eps_e, const MaterialParams& p) {
  const double i1 = eps_e.trace();
  const Matrix3 dev = deviator(eps_e);
  const double vol = 0.5 * p.bulk * i1 * i1;
  const double shear = p.shear * (dev.array() * dev.array()).sum();
  if (i1 >= 0.0) return {vol + shear, 0.0};
  return {shear, vol};
}

StressResult return_map(const Matrix3& eps_total, const QuadState& state_n, double d, double phi,
                        const MaterialParams& p, const Projection& projection) {
  if (!eps_total.allFinite() || !std::isfinite(d) || !std::isfinite(phi) ||
      !state_n.eps_p.allFinite() || !std::isfinite(state_n.alpha))
    throw NumericalFailure("return_map: non-finite input");

  StressResult r;
  r.new_state = state_n;
  r.new_state.lambda_p = 0.0;
  r.f = transition_from_heaviside(projection.heaviside(phi), p.kappa);
  r.g = degradation_g(d, p.kappa);

  const double K = p.bulk, mu = p.shear, h = p.hardening;
  const Matrix3 eps_e_trial = eps_total - state_n.eps_p;
  const double i1 = eps_e_trial.trace();
  const Matrix3 s_trial = 2.0 * mu * deviator(eps_e_trial);
  const double s_norm = s_trial.norm();
  r.q_trial = kSqrt32 * s_norm;
  r.trace_eps_e = i1;

  // Void points stay elastic.
  const bool solid = phi >= 0.0;
  const double radius_n = p.yield_stress + h * state_n.alpha;
  const double trial_excess = r.q_trial - radius_n;

  Matrix3 s = s_trial;
  if (solid && trial_excess > 0.0 && s_norm > 0.0) {
    const double dg = trial_excess / (3.0 * mu + h);
    r.n_hat = s_trial / s_norm;
    r.delta_gamma = dg;
    r.plastic = true;
    r.new_state.eps_p = state_n.eps_p + kSqrt32 * dg * r.n_hat;
    r.new_state.alpha = state_n.alpha + dg;
    r.new_state.lambda_p = dg;
    s = s_trial - 2.0 * mu * kSqrt32 * dg * r.n_hat;
  } else if (s_norm > 0.0) {
    r.n_hat = s_trial / s_norm;
  }

  const double q = kSqrt32 * s.norm();
  r.yield_residual = r.f * r.g * (q - p.yield_stress - h * r.new_state.alpha);

  const Matrix3 eye = Matrix3::Identity();
  const bool tensile = i1 >= 0.0;
  r.sigma_eff_plus = (tensile ? K * i1 : 0.0) * eye + s;
  r.sigma_eff_minus = (tensile ? 0.0 : K * i1) * eye;
  const Matrix3 eps_e = eps_total - r.new_state.eps_p;
  const auto [pp, pm] = energy_split(eps_e, p);
  r.psi_plus = pp;
  r.psi_minus = pm;
  r.psi_p = 0.5 * h * r.new_state.alpha * r.new_state.alpha;

  r.drive_gradient = r.sigma_eff_plus;
  if (r.plastic) r.drive_gradient -= p.yield_stress * (std::sqrt(6.0) * mu / (3.0 * mu + h)) * r.n_hat;

  r.sigma = r.f * (r.g * r.sigma_eff_plus + r.sigma_eff_minus);
  r.tangent = consistent_tangent(r, p);
  if (!r.sigma.allFinite()) throw NumericalFailure("return_map: non-finite stress");
  return r;
}

Matrix6 consistent_tangent(const StressResult& post, const MaterialParams& p) {
  const double K = p.bulk, mu = p.shear;
  const Vector6 one = identity_voigt();
  const Matrix6 ii = one * one.transpose();
  const bool tensile = post.trace_eps_e >= 0.0;

  double delta1 = 0.0, delta2 = 0.0;
  if (post.plastic && post.q_trial > 0.0) {
    delta1 = post.delta_gamma / post.q_trial;
    delta2 = 1.0 / (3.0 * mu + p.hardening);
  }
  const Vector6 n = stress_to_voigt(post.n_hat);
  Matrix6 c_plus = (tensile ? K : 0.0) * ii + 2.0 * mu * (1.0 - 3.0 * mu * delta1) * deviatoric_projector();
  if (post.plastic) c_plus += 6.0 * mu * mu * (delta1 - delta2) * n * n.transpose();
  const Matrix6 c_minus = (tensile ? 0.0 : K) * ii;
  return post.f * (post.g * c_plus + c_minus);
}

}  // namespace pftopo
