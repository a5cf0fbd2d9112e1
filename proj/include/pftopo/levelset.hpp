#pragma once

#include <Eigen/Core>
#include <vector>

#include "pftopo/linear_solver.hpp"
#include "pftopo/mesh.hpp"

namespace pftopo {

struct TopoParams {
  double eta_phi = 1.0;
  double l_phi = 1e-2;
  double tau_phi = 1e-4;
  double l_delta = 5.0;
  void validate() const;
};

double heaviside_exact(double phi);
// Logistic step whose derivative is dirac_regularized.
double heaviside_regularized(double phi, double l_delta);
double dirac_regularized(double phi, double l_delta);

// Selects how the topology field is projected onto solid/void inside the
// forward model. The regularized mode is used by finite-difference probes.
struct Projection {
  bool regularized = false;
  double l_delta = 5.0;
  double heaviside(double phi) const {
    return regularized ? heaviside_regularized(phi, l_delta) : heaviside_exact(phi);
  }
};

// Fraction of the domain where the interpolated field is non-negative,
// integrated with the element quadrature rule.
double volume_ratio(const FeSpace& space, const Eigen::VectorXd& phi);
double volume_ratio(const Mesh& mesh, const Eigen::VectorXd& phi);

// Integral of the projected Heaviside over the domain (absolute volume).
double projected_volume(const FeSpace& space, const Eigen::VectorXd& phi,
                        const Projection& projection);

// Integrated regularized Dirac per node: entry i is the integral of delta(phi) N_i.
Eigen::VectorXd dirac_nodal_integral(const FeSpace& space, const Eigen::VectorXd& phi,
                                     double l_delta);

SparseMatrix mass_matrix(const FeSpace& space);
SparseMatrix laplace_matrix(const FeSpace& space);

// Implicit reaction-diffusion step
//   (eta/tau) M (phi - phi_m) + l^2 K phi = M v,  phi = 1 on pinned nodes,
// followed by clamping to [-1, 1]. The system matrix is factored once.
class ReactionDiffusion {
 public:
  ReactionDiffusion(const FeSpace& space, const TopoParams& params,
                    std::vector<int> pinned_nodes,
                    LinearSolverKind kind = LinearSolverKind::SparseLU);
  Eigen::VectorXd solve(const Eigen::VectorXd& phi_m, const Eigen::VectorXd& velocity) const;

 private:
  TopoParams params_;
  std::vector<int> pinned_;
  std::vector<int> free_index_;  // -1 for pinned nodes
  SparseMatrix mass_;
  SparseMatrix a_free_pinned_;
  LinearSolver solver_;
  int num_free_ = 0;
};

Eigen::VectorXd solve_reaction_diffusion(const FeSpace& space, const Eigen::VectorXd& phi_m,
                                         const Eigen::VectorXd& velocity,
                                         const TopoParams& params,
                                         const std::vector<int>& pinned_nodes = {});

}  // namespace pftopo
