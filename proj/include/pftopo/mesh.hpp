#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace pftopo {

constexpr int kMaxNodesPerElement = 8;

using Point = Eigen::Vector3d;  // unused trailing coordinates are zero in 2D

struct Mesh {
  int dimension = 2;
  std::vector<int> counts;       // elements per axis
  std::vector<double> extents;   // box size per axis
  std::vector<Point> nodes;
  std::vector<std::array<int, kMaxNodesPerElement>> elements;
  std::map<std::string, std::vector<int>> node_sets;
  std::map<std::string, std::vector<int>> element_sets;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_elements() const { return static_cast<int>(elements.size()); }
  int nodes_per_element() const { return dimension == 2 ? 4 : 8; }
  double box_volume() const;
  const std::vector<int>& node_set(const std::string& name) const;
};

struct QuadratureRule {
  std::vector<Point> points;
  std::vector<double> weights;
};

struct ShapeEval {
  Eigen::Matrix<double, kMaxNodesPerElement, 1> values =
      Eigen::Matrix<double, kMaxNodesPerElement, 1>::Zero();
  // Column a holds the reference gradient of node a's shape function.
  Eigen::Matrix<double, 3, kMaxNodesPerElement> gradients =
      Eigen::Matrix<double, 3, kMaxNodesPerElement>::Zero();
};

Mesh build_structured_mesh(int dimension, const std::vector<int>& counts,
                           const std::vector<double>& extents);

ShapeEval shape_values(int dimension, const Point& local_point);

QuadratureRule quadrature(int dimension);

using NodePredicate = std::function<bool(const Point&)>;

// Adds the nodes satisfying the predicate as a named set. An empty match is
// allowed; *empty_warning (when given) reports it.
Mesh tag_region(Mesh mesh, const NodePredicate& predicate, const std::string& name,
                bool* empty_warning = nullptr);

// Shape data mapped to physical space for every element quadrature point.
struct QuadPoint {
  Eigen::Matrix<double, kMaxNodesPerElement, 1> N;
  Eigen::Matrix<double, 3, kMaxNodesPerElement> dNdx;
  double JxW = 0.0;
};

class FeSpace {
 public:
  explicit FeSpace(const Mesh& mesh);

  const Mesh& mesh() const { return *mesh_; }
  int dimension() const { return mesh_->dimension; }
  int num_qp() const { return num_qp_; }
  int nodes_per_element() const { return mesh_->nodes_per_element(); }
  const QuadPoint& qp(int element, int q) const { return qps_[element * num_qp_ + q]; }
  // Integral of each nodal shape function over the domain.
  const Eigen::VectorXd& lumped_measure() const { return lumped_; }
  double total_measure() const { return total_; }

 private:
  const Mesh* mesh_;
  int num_qp_;
  std::vector<QuadPoint> qps_;
  Eigen::VectorXd lumped_;
  double total_ = 0.0;
};

}  // namespace pftopo
