#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "pftopo/forward_solver.hpp"
#include "pftopo/optimizer.hpp"
#include "pftopo/verify.hpp"

namespace pftopo {

// Axis-aligned box (inclusive, with a small tolerance) naming a node set.
struct RegionSpec {
  std::string name;
  std::vector<double> min;
  std::vector<double> max;
};

struct RunConfig {
  int dimension = 2;
  std::vector<int> counts;
  std::vector<double> extents;

  MaterialParams material;  // psi_c resolved from whichever input was given
  std::optional<double> psi_c, sigma_c, G_c;

  OptimizerSettings optimizer;

  std::vector<RegionSpec> regions;
  std::vector<DirichletBc> dirichlet;
  std::string load_region;
  std::vector<std::string> pinned_regions;
  int n_steps = 1;
  double tau_f = 1e-4;
  Eigen::Vector3d body_force = Eigen::Vector3d::Zero();

  SolverOptions solver;
  bool regularized_projection = false;

  std::string output_directory = "output";
  int snapshot_every = 0;  // 0 writes only the final step
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
Problem build_problem(const RunConfig& config);

// Fixed 9-significant-digit rendering used by every export.
std::string format_number(double value);

// Steps at which snapshots are written: multiples of the cadence plus the last.
std::vector<int> snapshot_steps(int cadence, int n_steps);

void write_snapshot(const std::string& path, const FeSpace& space, const FieldSet& fields,
                    const std::vector<QuadState>& states);

void write_load_curve(const std::string& path, const Trajectory& trajectory);
void write_convergence(const std::string& path, const std::vector<ConvergenceRecord>& records);
// Load curve and convergence table into a directory.
void write_curves(const std::string& directory, const Trajectory& trajectory,
                  const std::vector<ConvergenceRecord>& records);
void write_fd_report(const std::string& path, const FDReport& report);

// Subcommands: run, forward-only, verify-sensitivity.
int cli_run(int argc, const char* const* argv);

}  // namespace pftopo
