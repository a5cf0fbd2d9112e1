#include "pftopo/levelset.hpp"

#include <algorithm>
#include <cmath>

#include "pftopo/errors.hpp"

namespace pftopo {

void TopoParams::validate() const {
  if (!(eta_phi > 0) || !(l_phi > 0) || !(tau_phi > 0) || !(l_delta > 0))
    throw InvalidArgument("topology parameters eta_phi, l_phi, tau_phi, l_delta must be > 0");
}

double heaviside_exact(double phi) { return phi >= 0.0 ? 1.0 : 0.0; }

double heaviside_regularized(double phi, double l_delta) {
  const double t = l_delta * phi;
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double dirac_regularized(double phi, double l_delta) {
  const double e = std::exp(-l_delta * std::abs(phi));
  return l_delta * e / ((1.0 + e) * (1.0 + e));
}

static double phi_at(const QuadPoint& qp, const std::array<int, kMaxNodesPerElement>& conn,
                     int npe, const Eigen::VectorXd& phi) {
  double v = 0.0;
  for (int a = 0; a < npe; ++a) v += qp.N[a] * phi[conn[a]];
  return v;
}

double projected_volume(const FeSpace& space, const Eigen::VectorXd& phi,
                        const Projection& projection) {
  const Mesh& m = space.mesh();
  if (phi.size() != m.num_nodes()) throw InvalidArgument("phi size does not match mesh nodes");
  double v = 0.0;
  const int npe = m.nodes_per_element();
  for (int e = 0; e < m.num_elements(); ++e)
    for (int q = 0; q < space.num_qp(); ++q) {
      const QuadPoint& qp = space.qp(e, q);
      v += projection.heaviside(phi_at(qp, m.elements[e], npe, phi)) * qp.JxW;
    }
  return v;
}

double volume_ratio(const FeSpace& space, const Eigen::VectorXd& phi) {
  return projected_volume(space, phi, Projection{}) / space.total_measure();
}

double volume_ratio(const Mesh& mesh, const Eigen::VectorXd& phi) {
  FeSpace space(mesh);
  return volume_ratio(space, phi);
}

Eigen::VectorXd dirac_nodal_integral(const FeSpace& space, const Eigen::VectorXd& phi,
                                     double l_delta) {
  const Mesh& m = space.mesh();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.num_nodes());
  const int npe = m.nodes_per_element();
  for (int e = 0; e < m.num_elements(); ++e)
    for (int q = 0; q < space.num_qp(); ++q) {
      const QuadPoint& qp = space.qp(e, q);
      const double dl = dirac_regularized(phi_at(qp, m.elements[e], npe, phi), l_delta);
      for (int a = 0; a < npe; ++a) out[m.elements[e][a]] += dl * qp.N[a] * qp.JxW;
    }
  return out;
}

namespace {

template <class Kernel>
SparseMatrix assemble_scalar(const FeSpace& space, Kernel kernel) {
  const Mesh& m = space.mesh();
  const int npe = m.nodes_per_element();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(m.num_elements()) * npe * npe);
  for (int e = 0; e < m.num_elements(); ++e) {
    Eigen::Matrix<double, kMaxNodesPerElement, kMaxNodesPerElement> ke =
        Eigen::Matrix<double, kMaxNodesPerElement, kMaxNodesPerElement>::Zero();
    for (int q = 0; q < space.num_qp(); ++q) kernel(space.qp(e, q), npe, ke);
    for (int a = 0; a < npe; ++a)
      for (int b = 0; b < npe; ++b) trip.emplace_back(m.elements[e][a], m.elements[e][b], ke(a, b));
  }
  SparseMatrix A(m.num_nodes(), m.num_nodes());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

}  // namespace

SparseMatrix mass_matrix(const FeSpace& space) {
  return assemble_scalar(space, [](const QuadPoint& qp, int npe, auto& ke) {
    for (int a = 0; a < npe; ++a)
      for (int b = 0; b < npe; ++b) ke(a, b) += qp.N[a] * qp.N[b] * qp.JxW;
  });
}

SparseMatrix laplace_matrix(const FeSpace& space) {
  return assemble_scalar(space, [](const QuadPoint& qp, int npe, auto& ke) {
    for (int a = 0; a < npe; ++a)
      for (int b = 0; b < npe; ++b) ke(a, b) += qp.dNdx.col(a).dot(qp.dNdx.col(b)) * qp.JxW;
  });
}

ReactionDiffusion::ReactionDiffusion(const FeSpace& space, const TopoParams& params,
                                     std::vector<int> pinned_nodes, LinearSolverKind kind)
    : params_(params), pinned_(std::move(pinned_nodes)), solver_(kind) {
  params_.validate();
  const int n = space.mesh().num_nodes();
  std::sort(pinned_.begin(), pinned_.end());
  pinned_.erase(std::unique(pinned_.begin(), pinned_.end()), pinned_.end());
  free_index_.assign(n, 0);
  for (int p : pinned_) {
    if (p < 0 || p >= n) throw InvalidArgument("pinned node index out of range");
    free_index_[p] = -1;
  }
  for (int i = 0; i < n; ++i)
    if (free_index_[i] >= 0) free_index_[i] = num_free_++;

  mass_ = mass_matrix(space);
  const SparseMatrix A =
      (params_.eta_phi / params_.tau_phi) * mass_ + params_.l_phi * params_.l_phi * laplace_matrix(space);

  std::vector<int> pinned_index(n, -1);
  for (std::size_t k = 0; k < pinned_.size(); ++k) pinned_index[pinned_[k]] = static_cast<int>(k);
  std::vector<Eigen::Triplet<double>> ff, fp;
  for (int c = 0; c < A.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(A, c); it; ++it) {
      const int r = static_cast<int>(it.row()), col = static_cast<int>(it.col());
      if (free_index_[r] < 0) continue;
      if (free_index_[col] >= 0)
        ff.emplace_back(free_index_[r], free_index_[col], it.value());
      else
        fp.emplace_back(free_index_[r], pinned_index[col], it.value());
    }
  SparseMatrix Aff(num_free_, num_free_);
  Aff.setFromTriplets(ff.begin(), ff.end());
  a_free_pinned_.resize(num_free_, static_cast<int>(pinned_.size()));
  a_free_pinned_.setFromTriplets(fp.begin(), fp.end());
  solver_.factorize(Aff, "reaction-diffusion");
}

Eigen::VectorXd ReactionDiffusion::solve(const Eigen::VectorXd& phi_m,
                                         const Eigen::VectorXd& velocity) const {
  const int n = static_cast<int>(free_index_.size());
  if (phi_m.size() != n || velocity.size() != n)
    throw InvalidArgument("reaction-diffusion: field sizes do not match mesh");
  if (!velocity.allFinite() || !phi_m.allFinite())
    throw InvalidArgument("reaction-diffusion: non-finite input");

  const Eigen::VectorXd rhs_full =
      mass_ * ((params_.eta_phi / params_.tau_phi) * phi_m + velocity);
  Eigen::VectorXd rhs(num_free_);
  for (int i = 0; i < n; ++i)
    if (free_index_[i] >= 0) rhs[free_index_[i]] = rhs_full[i];
  if (!pinned_.empty())
    rhs -= a_free_pinned_ * Eigen::VectorXd::Ones(static_cast<int>(pinned_.size()));

  const Eigen::VectorXd x = solver_.solve(rhs);
  Eigen::VectorXd phi(n);
  for (int i = 0; i < n; ++i)
    phi[i] = free_index_[i] >= 0 ? std::clamp(x[free_index_[i]], -1.0, 1.0) : 1.0;
  return phi;
}

Eigen::VectorXd solve_reaction_diffusion(const FeSpace& space, const Eigen::VectorXd& phi_m,
                                         const Eigen::VectorXd& velocity,
                                         const TopoParams& params,
                                         const std::vector<int>& pinned_nodes) {
  ReactionDiffusion rd(space, params, pinned_nodes);
  return rd.solve(phi_m, velocity);
}

}  // namespace pftopo
