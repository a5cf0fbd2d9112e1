#include "pftopo/mesh.hpp"

#include <Eigen/LU>
#include <cmath>

#include "pftopo/errors.hpp"

namespace pftopo {

namespace {

// Reference corner signs in local node order: counter-clockwise on the
// bottom face, then the same on the top face.
constexpr int kCorner[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                               {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};

}  // namespace

double Mesh::box_volume() const {
  double v = 1.0;
  for (double e : extents) v *= e;
  return v;
}

const std::vector<int>& Mesh::node_set(const std::string& name) const {
  auto it = node_sets.find(name);
  if (it == node_sets.end()) throw InvalidArgument("unknown node set '" + name + "'");
  return it->second;
}

Mesh build_structured_mesh(int dimension, const std::vector<int>& counts,
                           const std::vector<double>& extents) {
  if (dimension != 2 && dimension != 3) throw InvalidArgument("dimension must be 2 or 3");
  if (static_cast<int>(counts.size()) != dimension ||
      static_cast<int>(extents.size()) != dimension)
    throw InvalidArgument("counts and extents need one entry per axis");
  for (int i = 0; i < dimension; ++i) {
    if (counts[i] < 1) throw InvalidArgument("element count per axis must be >= 1");
    if (!(extents[i] > 0.0) || !std::isfinite(extents[i]))
      throw InvalidArgument("extent per axis must be positive");
  }

  Mesh m;
  m.dimension = dimension;
  m.counts = counts;
  m.extents = extents;

  const int nx = counts[0] + 1, ny = counts[1] + 1;
  const int nz = dimension == 3 ? counts[2] + 1 : 1;
  m.nodes.reserve(static_cast<std::size_t>(nx) * ny * nz);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        Point p = Point::Zero();
        p[0] = extents[0] * i / counts[0];
        p[1] = extents[1] * j / counts[1];
        if (dimension == 3) p[2] = extents[2] * k / counts[2];
        m.nodes.push_back(p);
      }

  auto node_id = [&](int i, int j, int k) { return i + nx * (j + ny * k); };
  const int ez = dimension == 3 ? counts[2] : 1;
  for (int k = 0; k < ez; ++k)
    for (int j = 0; j < counts[1]; ++j)
      for (int i = 0; i < counts[0]; ++i) {
        std::array<int, kMaxNodesPerElement> conn{};
        conn.fill(-1);
        for (int a = 0; a < m.nodes_per_element(); ++a) {
          conn[a] = node_id(i + (kCorner[a][0] > 0), j + (kCorner[a][1] > 0),
                            k + (dimension == 3 && kCorner[a][2] > 0));
        }
        m.elements.push_back(conn);
      }
  return m;
}

ShapeEval shape_values(int dimension, const Point& xi) {
  ShapeEval s;
  const int n = dimension == 2 ? 4 : 8;
  const double scale = dimension == 2 ? 0.25 : 0.125;
  for (int a = 0; a < n; ++a) {
    double f[3], df[3];
    for (int c = 0; c < 3; ++c) {
      if (c < dimension) {
        f[c] = 1.0 + kCorner[a][c] * xi[c];
        df[c] = kCorner[a][c];
      } else {
        f[c] = 1.0;
        df[c] = 0.0;
      }
    }
    s.values[a] = scale * f[0] * f[1] * f[2];
    s.gradients(0, a) = scale * df[0] * f[1] * f[2];
    s.gradients(1, a) = scale * f[0] * df[1] * f[2];
    s.gradients(2, a) = scale * f[0] * f[1] * df[2];
  }
  return s;
}

QuadratureRule quadrature(int dimension) {
  if (dimension != 2 && dimension != 3) throw InvalidArgument("dimension must be 2 or 3");
  const double g = 1.0 / std::sqrt(3.0);
  QuadratureRule r;
  // Same ordering as the element corners so point q sits nearest node q.
  const int n = dimension == 2 ? 4 : 8;
  for (int a = 0; a < n; ++a) {
    Point p = Point::Zero();
    for (int c = 0; c < dimension; ++c) p[c] = kCorner[a][c] * g;
    r.points.push_back(p);
    r.weights.push_back(1.0);
  }
  return r;
}

Mesh tag_region(Mesh mesh, const NodePredicate& predicate, const std::string& name,
                bool* empty_warning) {
  if (mesh.node_sets.count(name)) throw InvalidArgument("region '" + name + "' already defined");
  std::vector<int> ids;
  for (int i = 0; i < mesh.num_nodes(); ++i)
    if (predicate(mesh.nodes[i])) ids.push_back(i);
  if (empty_warning) *empty_warning = ids.empty();
  mesh.node_sets.emplace(name, std::move(ids));
  return mesh;
}

FeSpace::FeSpace(const Mesh& mesh) : mesh_(&mesh) {
  const int dim = mesh.dimension;
  const QuadratureRule rule = quadrature(dim);
  num_qp_ = static_cast<int>(rule.points.size());
  const int npe = mesh.nodes_per_element();

  std::vector<ShapeEval> ref;
  for (const auto& p : rule.points) ref.push_back(shape_values(dim, p));

  qps_.resize(static_cast<std::size_t>(mesh.num_elements()) * num_qp_);
  lumped_ = Eigen::VectorXd::Zero(mesh.num_nodes());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& conn = mesh.elements[e];
    for (int q = 0; q < num_qp_; ++q) {
      Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
      for (int a = 0; a < npe; ++a)
        for (int r = 0; r < dim; ++r)
          for (int c = 0; c < dim; ++c) J(r, c) += mesh.nodes[conn[a]][r] * ref[q].gradients(c, a);
      if (dim == 2) J(2, 2) = 1.0;
      const double det = J.determinant();
      if (!(det > 0.0)) throw InvalidArgument("non-positive element Jacobian");
      const Eigen::Matrix3d Jinv_t = J.inverse().transpose();

      QuadPoint& qp = qps_[e * num_qp_ + q];
      qp.N = ref[q].values;
      qp.dNdx.setZero();
      for (int a = 0; a < npe; ++a) qp.dNdx.col(a) = Jinv_t * ref[q].gradients.col(a);
      if (dim == 2) qp.dNdx.row(2).setZero();
      qp.JxW = det * rule.weights[q];
      for (int a = 0; a < npe; ++a) lumped_[conn[a]] += qp.N[a] * qp.JxW;
      total_ += qp.JxW;
    }
  }
}

}  // namespace pftopo
