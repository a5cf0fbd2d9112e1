#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "pftopo/levelset.hpp"
#include "pftopo/linear_solver.hpp"
#include "pftopo/material.hpp"
#include "pftopo/mesh.hpp"

namespace pftopo {

// Prescribed displacement component on a node set; value at step n is
// n * increment.
struct DirichletBc {
  std::string region;
  int component = 0;
  double increment = 0.0;
};

struct SolverOptions {
  double newton_abs_tol = 1e-10;
  double newton_rel_tol = 1e-8;
  int newton_max_iterations = 50;
  double stagger_rel_tol = 1e-6;
  double stagger_abs_tol = 1e-10;
  int stagger_max_iterations = 200;
  int stagger_anderson_depth = 5;  // 0 disables mixing
  LinearSolverKind linear_solver = LinearSolverKind::SparseLU;
};

struct Problem {
  Mesh mesh;
  MaterialParams material;
  std::vector<DirichletBc> dirichlet;
  Eigen::Vector3d body_force = Eigen::Vector3d::Zero();
  int n_steps = 1;
  double tau_f = 1e-4;
  std::string load_region;                  // topology pinned solid here
  std::vector<std::string> pinned_regions;  // further solid-pinned regions
  Projection projection;
  SolverOptions solver;
};

struct FieldSet {
  Eigen::VectorXd u;
  Eigen::VectorXd d;
  Eigen::VectorXd phi;
  Eigen::VectorXd reactions;  // internal force at prescribed DOFs
};

struct StepRecord {
  FieldSet fields;
  std::vector<QuadState> states;
  Eigen::VectorXd prescribed;  // prescribed DOF values at this step
  std::vector<char> d_locked;  // node held by the irreversibility bound
  double load_displacement = 0.0;
  double load_reaction = 0.0;
  int stagger_iterations = 0;
  int newton_iterations = 0;
  double clamp_overshoot = 0.0;
};

struct Trajectory {
  StepRecord initial;
  std::vector<StepRecord> steps;  // one per committed load increment
  double tau_f = 0.0;
  bool aborted = false;
  std::string abort_reason;

  int size() const { return static_cast<int>(steps.size()); }
  // 0 is the unloaded initial state, n >= 1 the n-th committed step.
  const StepRecord& at(int n) const { return n == 0 ? initial : steps[n - 1]; }
};

struct TangentBlocks {
  SparseMatrix K_uu, K_ud, K_du, K_dd;
};

struct DofMap {
  int num_dofs = 0;
  std::vector<int> prescribed;     // sorted DOF ids
  Eigen::VectorXd increments;      // per prescribed DOF
  std::vector<int> free_dofs;
  std::vector<int> free_index;     // DOF -> free slot or -1
  std::vector<int> prescribed_index;  // DOF -> prescribed slot or -1
  std::vector<int> loaded;         // prescribed slots with nonzero increment
};

class ForwardSolver {
 public:
  explicit ForwardSolver(Problem problem);
  ForwardSolver(const ForwardSolver&) = delete;
  ForwardSolver& operator=(const ForwardSolver&) = delete;

  const Problem& problem() const { return problem_; }
  const Mesh& mesh() const { return problem_.mesh; }
  const FeSpace& space() const { return space_; }
  const DofMap& dofs() const { return dofs_; }
  int dimension() const { return problem_.mesh.dimension; }
  int num_qp_total() const { return problem_.mesh.num_elements() * space_.num_qp(); }
  // Nodes whose topology value is held at 1.
  std::vector<int> pinned_phi_nodes() const;

  StepRecord initial_state(const Eigen::VectorXd& phi) const;
  Eigen::VectorXd prescribed_values(int step) const { return step * dofs_.increments; }

  struct UAssembly {
    Eigen::VectorXd residual;  // internal minus external force
    Eigen::VectorXd internal;
    SparseMatrix K_uu;
  };
  UAssembly assemble_u(const FieldSet& fields, const std::vector<QuadState>& states_n,
                       bool with_tangent = true) const;

  struct DAssembly {
    Eigen::VectorXd residual;
    SparseMatrix K_dd;
  };
  DAssembly assemble_d(const FieldSet& fields, const Eigen::VectorXd& d_previous,
                       const std::vector<double>& history) const;

  // History max(H_n, D(u)) at every quadrature point for the current fields.
  std::vector<double> trial_history(const FieldSet& fields,
                                    const std::vector<QuadState>& states_n) const;

  StepRecord staggered_step(const StepRecord& previous, int step) const;
  Trajectory run_load_history(const Eigen::VectorXd& phi, int n_steps = 0) const;

  // Blocks of the coupled tangent at a committed step, linearized about the
  // previous committed state.
  TangentBlocks tangent_blocks(const StepRecord& step, const StepRecord& previous) const;

  // Explicit derivative of [R_u; R_d] with respect to nodal phi, internal
  // variables frozen. Prescribed rows carry the internal force only.
  SparseMatrix residual_phi_derivative(const StepRecord& step, const StepRecord& previous) const;

  double free_residual_norm(const Eigen::VectorXd& residual) const;
  SparseMatrix restrict_free(const SparseMatrix& K) const;

 private:
  int newton_solve(FieldSet& fields, const std::vector<QuadState>& states_n) const;
  void solve_d_bounded(const DAssembly& da, const Eigen::VectorXd& d_n, StepRecord& rec) const;
  double projected_d_residual_norm(const Eigen::VectorXd& r, const Eigen::VectorXd& d,
                                   const Eigen::VectorXd& d_n) const;
  void fill_load_summary(StepRecord& rec) const;

  Problem problem_;
  FeSpace space_;
  DofMap dofs_;
};

}  // namespace pftopo
