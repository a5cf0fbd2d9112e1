#include "pftopo/filter.hpp"

#include <cmath>

#include "pftopo/errors.hpp"

namespace pftopo {

double filter_weight(double distance, double r_min) {
  const double s = distance / r_min;
  return std::exp(-3.0 * s * s * s);
}

FilterKernel build_kernel(const Mesh& mesh, double r_min) {
  if (!(r_min > 0.0)) throw InvalidArgument("filter radius must be > 0");
  FilterKernel k;
  k.r_min = r_min;
  const int n = mesh.num_nodes();
  k.neighbors.resize(n);
  k.weights.resize(n);
  const double cutoff = 2.0 * r_min;

  // Structured grids allow a bounded index window per axis.
  std::vector<int> stride(mesh.dimension), reach(mesh.dimension), npa(mesh.dimension);
  int s = 1;
  for (int a = 0; a < mesh.dimension; ++a) {
    npa[a] = mesh.counts[a] + 1;
    stride[a] = s;
    s *= npa[a];
    const double h = mesh.extents[a] / mesh.counts[a];
    reach[a] = static_cast<int>(std::floor(cutoff / h + 1e-12));
  }
  for (int i = 0; i < n; ++i) {
    int idx[3] = {0, 0, 0};
    int rem = i;
    for (int a = mesh.dimension - 1; a >= 0; --a) {
      idx[a] = rem / stride[a];
      rem -= idx[a] * stride[a];
    }
    int lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
    for (int a = 0; a < mesh.dimension; ++a) {
      lo[a] = std::max(0, idx[a] - reach[a]);
      hi[a] = std::min(npa[a] - 1, idx[a] + reach[a]);
    }
    for (int z = lo[2]; z <= hi[2]; ++z)
      for (int y = lo[1]; y <= hi[1]; ++y)
        for (int x = lo[0]; x <= hi[0]; ++x) {
          const int j = x + (mesh.dimension > 1 ? y * stride[1] : 0) +
                        (mesh.dimension > 2 ? z * stride[2] : 0);
          const double dist = (mesh.nodes[i] - mesh.nodes[j]).norm();
          if (dist >= cutoff * (1.0 - 1e-12)) continue;
          k.neighbors[i].push_back(j);
          k.weights[i].push_back(filter_weight(dist, r_min));
        }
  }
  return k;
}

Eigen::VectorXd filter_field(const FilterKernel& kernel, const Eigen::VectorXd& field) {
  const int n = static_cast<int>(kernel.neighbors.size());
  if (field.size() != n) throw InvalidArgument("filter_field: field size does not match kernel");
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    double num = 0.0, den = 0.0;
    const auto& nb = kernel.neighbors[i];
    if (nb.empty()) throw std::logic_error("filter kernel has an empty neighbor set");
    // Averaging the offsets from the own value reproduces constants exactly.
    for (std::size_t k = 0; k < nb.size(); ++k) {
      num += kernel.weights[i][k] * (field[nb[k]] - field[i]);
      den += kernel.weights[i][k];
    }
    out[i] = field[i] + num / den;
  }
  return out;
}

Eigen::VectorXd history_average(const Eigen::VectorXd& current, const Eigen::VectorXd& prev1,
                                const Eigen::VectorXd& prev2, int iteration) {
  if (iteration <= 2) return current;
  if (prev1.size() != current.size() || prev2.size() != current.size())
    throw InvalidArgument("history_average: field sizes differ");
  return (current + prev1 + prev2) / 3.0;
}

}  // namespace pftopo
