#pragma once

#include <Eigen/Core>
#include <vector>

#include "pftopo/forward_solver.hpp"
#include "pftopo/material.hpp"

namespace pftopo {

double relative_error(double a, double b, double floor = 1e-14);

struct FDEntry {
  int index = 0;          // node, or element with the element probe
  double analytic = 0.0;  // -G
  double fd = 0.0;        // central difference of -L
  double rel_error = 0.0;
  bool valid = true;
};

struct FDReport {
  std::vector<FDEntry> entries;
  double delta = 0.0;
  int formulation = 1;
  bool element_probe = false;
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  int invalid_count = 0;
};

void summarize(FDReport& report);

// J + lambda_V * integral of H_reg(phi). The solver should use the
// regularized projection. Sets *ok to false when the load history aborts.
double lagrangian(const ForwardSolver& solver, const Eigen::VectorXd& phi, double lambda_V,
                  bool* ok = nullptr);

// -(L(phi + delta e) - L(phi - delta e)) / (2 delta), with e the indicator of
// the probe nodes.
double fd_sensitivity(const ForwardSolver& regularized_solver, const Eigen::VectorXd& phi,
                      const std::vector<int>& probe_nodes, double delta, double lambda_V,
                      bool* valid = nullptr);

struct SensitivityCheckOptions {
  int formulation = 1;
  double delta = 1e-4;
  double lambda_V = 0.0;
  bool element_probe = false;
};

// Analytic velocity -G on the exact-projection problem against central
// differences on its regularized copy.
FDReport compare_sensitivities(const Problem& problem, const Eigen::VectorXd& phi,
                               const std::vector<int>& subset, const SensitivityCheckOptions& options);

// Nodes off the domain boundary with phi >= 0.
std::vector<int> interior_solid_nodes(const Mesh& mesh, const Eigen::VectorXd& phi);

struct TangentSample {
  Matrix3 eps = Matrix3::Zero();
  QuadState state;
  double d = 0.0;
  double phi = 1.0;
};

struct TangentCheckReport {
  double max_rel_error_elastic = 0.0;
  double max_rel_error_plastic = 0.0;
  int elastic_samples = 0;
  int plastic_samples = 0;
  int skipped = 0;  // perturbation crossed a branch boundary
};

// Frobenius-relative error between the consistent tangent and a central
// difference of the stress, per sample.
double tangent_fd_error(const TangentSample& sample, const MaterialParams& params, bool* same_branch = nullptr);
TangentCheckReport fd_tangent_check(const std::vector<TangentSample>& samples, const MaterialParams& params);

}  // namespace pftopo
