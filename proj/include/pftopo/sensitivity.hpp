#pragma once

#include <Eigen/Core>
#include <vector>

#include "pftopo/forward_solver.hpp"

namespace pftopo {

// -0.5 (P_n + P_{n-1}) . du
double objective_increment(const Eigen::VectorXd& P_n, const Eigen::VectorXd& P_n_minus_1,
                           const Eigen::VectorXd& du);
double total_objective(const ForwardSolver& solver, const Trajectory& trajectory);

struct AdjointState {
  Eigen::VectorXd lambda_u, lambda_d;  // paired with the step-n residual
  Eigen::VectorXd mu_u, mu_d;          // paired with the step-(n-1) residual
  double lambda_V = 0.0;
};

struct SensitivityField {
  Eigen::VectorXd G_S;
  Eigen::VectorXd G_V;
  Eigen::VectorXd G_total;
};

// Solves the transposed tangent with prescribed displacement entries pinned
// to pinned_u. Formulation 1 uses K_uu only; formulation 2 the coupled
// [K_uu K_ud; K_du K_dd] system, with bound-locked phase-field nodes held at
// zero. Returns the stacked [u; d] adjoint.
Eigen::VectorXd solve_transposed(const ForwardSolver& solver, const TangentBlocks& blocks,
                                 const std::vector<char>& d_locked,
                                 const Eigen::VectorXd& pinned_u, int formulation);

// Adjoints of one step: lambda from the step-n tangent and mu from the
// step-(n-1) tangent, both pinned to du/2.
AdjointState adjoint_solve(const ForwardSolver& solver, const TangentBlocks& tangents_prev,
                           const std::vector<char>& locked_prev, const TangentBlocks& tangents_n,
                           const std::vector<char>& locked_n, const Eigen::VectorXd& du,
                           int formulation);

// Backward sweep over a trajectory; entry n-1 holds the adjoints of step n.
// Equal consecutive increments reuse mu_n = lambda_{n-1}.
std::vector<AdjointState> adjoint_sweep(const ForwardSolver& solver, const Trajectory& trajectory,
                                        int formulation);

// Integrated nodal sensitivity of the Lagrangian J + lambda_V * volume.
SensitivityField total_sensitivity(const ForwardSolver& solver, const Trajectory& trajectory,
                                   const std::vector<AdjointState>& adjoints, double lambda_V,
                                   int formulation);

// Forward run, adjoint sweep and sensitivity assembly in one call.
SensitivityField compute_sensitivity(const ForwardSolver& solver, const Trajectory& trajectory,
                                     double lambda_V, int formulation);

// -G normalized by the mean absolute value. A vanishing mean skips the
// normalization and sets *degenerate.
Eigen::VectorXd velocity_from_sensitivity(const Eigen::VectorXd& G, bool* degenerate = nullptr);

}  // namespace pftopo
