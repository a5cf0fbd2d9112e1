#pragma once

#include <Eigen/Core>
#include <vector>

#include "pftopo/mesh.hpp"

namespace pftopo {

double filter_weight(double distance, double r_min);

struct FilterKernel {
  double r_min = 0.0;
  std::vector<std::vector<int>> neighbors;    // per node, includes itself
  std::vector<std::vector<double>> weights;   // aligned with neighbors
};

// Neighbors are the nodes closer than 2 r_min.
FilterKernel build_kernel(const Mesh& mesh, double r_min);

Eigen::VectorXd filter_field(const FilterKernel& kernel, const Eigen::VectorXd& field);

// Mean of the current and the two previous averaged fields for m > 2,
// otherwise the current field.
Eigen::VectorXd history_average(const Eigen::VectorXd& current, const Eigen::VectorXd& prev1,
                                const Eigen::VectorXd& prev2, int iteration);

}  // namespace pftopo
