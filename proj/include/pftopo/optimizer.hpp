#pragma once

#include <Eigen/Core>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "pftopo/filter.hpp"
#include "pftopo/forward_solver.hpp"
#include "pftopo/levelset.hpp"

namespace pftopo {

struct OptimizerSettings {
  TopoParams topo;
  double r_min = 0.0;  // <= 0 selects 3 l_f
  double theta_v = 0.05;
  double target_volume = 0.4;
  int formulation = 2;
  int max_iterations = 200;
  double stagnation_tol = 1e-4;
  int stagnation_count = 3;
  double volume_tol = 1e-2;
  double bisection_tol = 1e-3;
  int bisection_max_iterations = 60;
  double lambda_lower = 1e-8;
  double lambda_upper = 1e8;
  double onset_threshold = 0.1;
  void validate() const;
};

struct OptimizerState {
  Eigen::VectorXd phi;
  double lambda_V = 0.0;
  double lambda_l = 1e-8;
  double lambda_u = 1e8;
  double target_volume = 0.4;
  double expected_volume = 1.0;
  double theta_v = 0.05;
  std::vector<Eigen::VectorXd> sensitivity_history;  // averaged, most recent last
  std::vector<double> objective_history;
};

double expected_volume(double chi_prev, double target, double theta_v);

struct BisectionResult {
  Eigen::VectorXd phi;
  double lambda_V = 0.0;
  double chi = 0.0;
  int iterations = 0;
  bool converged = false;
  bool bracket_ok = true;  // lambda_l <= lambda_u held throughout
  double lambda_l = 0.0, lambda_u = 0.0;
  std::vector<double> lambda_trace;
};

// Searches lambda_V so that the reaction-diffusion update of state.phi meets
// state.expected_volume. Sensitivities are nodal densities; the volume part
// enters as lambda_V * volume_density. Updates the bracket and lambda_V in
// state but leaves state.phi untouched.
BisectionResult bisection_step(OptimizerState& state, const Eigen::VectorXd& G_S_filtered,
                               const Eigen::VectorXd& volume_density, const ReactionDiffusion& rd,
                               const FeSpace& space, const OptimizerSettings& settings);

struct ConvergenceRecord {
  int iteration = 0;
  double objective = 0.0;
  double chi = 0.0;             // volume ratio of the analyzed design
  double lambda_V = 0.0;        // multiplier chosen for the next design
  int bisection_iterations = 0;
  bool bisection_converged = true;
  bool bracket_ok = true;
  double expected_volume = 0.0;  // schedule target for the next design
  double chi_next = 0.0;         // volume ratio of the next design
  int stagger_total = 0;
  int stagger_max = 0;
  double max_d = 0.0;
  double max_alpha = 0.0;        // over every committed step
  double onset_displacement = std::numeric_limits<double>::infinity();
  double wall_time = 0.0;        // seconds; not exported
};

struct OptimizationResult {
  Eigen::VectorXd phi;  // last analyzed design
  std::vector<ConvergenceRecord> records;
  bool converged = false;
  bool aborted = false;
  std::string stop_reason;
  Trajectory first_trajectory;
  Trajectory last_trajectory;
};

// Largest phase-field value over solid nodes at a step.
double max_solid_damage(const StepRecord& step);
// Prescribed displacement magnitude at the first step whose solid max d
// exceeds the threshold; infinity when no step does.
double fracture_onset(const Trajectory& trajectory, double threshold);

using IterationCallback = std::function<void(const ConvergenceRecord&)>;

OptimizationResult run_optimization(const ForwardSolver& solver, const OptimizerSettings& settings,
                                    const Eigen::VectorXd& phi0, const IterationCallback& on_iteration = {});

}  // namespace pftopo
