#pragma once

#include <Eigen/Core>
#include <utility>

#include "pftopo/levelset.hpp"

namespace pftopo {

using Matrix3 = Eigen::Matrix3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

// Voigt order xx, yy, zz, xy, yz, xz. Strains carry engineering shear,
// stresses carry tensor components.
Vector6 strain_to_voigt(const Matrix3& eps);
Matrix3 voigt_to_strain(const Vector6& v);
Vector6 stress_to_voigt(const Matrix3& sigma);

struct MaterialParams {
  double bulk = 0.0;          // K
  double shear = 0.0;         // mu
  double hardening = 0.0;     // h
  double yield_stress = 1e16; // sigma_Y; the default disables plasticity
  double psi_c = 0.0;
  double zeta = 1.0;
  double eta_f = 1e-6;
  double kappa = 1e-8;
  double l_f = 0.0;

  double young() const { return 9.0 * bulk * shear / (3.0 * bulk + shear); }
  void validate() const;
};

struct QuadState {
  Matrix3 eps_p = Matrix3::Zero();
  double alpha = 0.0;
  double history = 0.0;
  double lambda_p = 0.0;
};

struct StressResult {
  Matrix3 sigma = Matrix3::Zero();
  Matrix6 tangent = Matrix6::Zero();
  double psi_plus = 0.0;   // effective damageable elastic energy
  double psi_minus = 0.0;  // effective undamageable elastic energy
  double psi_p = 0.0;      // effective plastic energy 0.5 h alpha^2
  QuadState new_state;

  // Undegraded quantities reused by the tangent, coupling blocks and
  // topology derivatives.
  Matrix3 sigma_eff_plus = Matrix3::Zero();
  Matrix3 sigma_eff_minus = Matrix3::Zero();
  // Derivative of psi_plus + psi_p with respect to total strain.
  Matrix3 drive_gradient = Matrix3::Zero();
  Matrix3 n_hat = Matrix3::Zero();
  double trace_eps_e = 0.0;
  double q_trial = 0.0;
  double delta_gamma = 0.0;
  double yield_residual = 0.0;  // degraded yield function after the return
  bool plastic = false;
  double f = 1.0;
  double g = 1.0;
};

double degradation_g(double d, double kappa);
double degradation_g_prime(double d, double kappa);
// Transition with the exact Heaviside.
double transition_f(double phi, double kappa);
// Transition for an already projected Heaviside value.
double transition_from_heaviside(double heaviside, double kappa);

std::pair<double, double> energy_split(const Matrix3& eps_e, const MaterialParams& params);

// Radial return on effective stresses. The history entry of new_state is
// copied from state_n; the phase-field module owns its update.
StressResult return_map(const Matrix3& eps_total, const QuadState& state_n, double d, double phi,
                        const MaterialParams& params, const Projection& projection = {});

Matrix6 consistent_tangent(const StressResult& post, const MaterialParams& params);

}  // namespace pftopo
