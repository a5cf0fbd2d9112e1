#include "pftopo/sensitivity.hpp"

#include <cmath>

#include "pftopo/errors.hpp"
#include "pftopo/log.hpp"

namespace pftopo {

double objective_increment(const Eigen::VectorXd& P_n, const Eigen::VectorXd& P_n_minus_1,
                           const Eigen::VectorXd& du) {
  if (P_n.size() != du.size() || P_n_minus_1.size() != du.size())
    throw InvalidArgument("objective_increment: vector sizes differ");
  return -0.5 * (P_n + P_n_minus_1).dot(du);
}

double total_objective(const ForwardSolver& solver, const Trajectory& t) {
  (void)solver;
  double J = 0.0;
  for (int n = 1; n <= t.size(); ++n)
    J += objective_increment(t.at(n).fields.reactions, t.at(n - 1).fields.reactions,
                             t.at(n).prescribed - t.at(n - 1).prescribed);
  return J;
}

namespace {

SparseMatrix coupled_matrix(const TangentBlocks& b, int nu, int nn, int formulation) {
  std::vector<Eigen::Triplet<double>> trip;
  auto add = [&](const SparseMatrix& K, int r0, int c0) {
    for (int c = 0; c < K.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(K, c); it; ++it)
        trip.emplace_back(r0 + static_cast<int>(it.row()), c0 + static_cast<int>(it.col()), it.value());
  };
  add(b.K_uu, 0, 0);
  if (formulation == 2) {
    add(b.K_ud, 0, nu);
    add(b.K_du, nu, 0);
    add(b.K_dd, nu, nu);
  }
  const int n = formulation == 2 ? nu + nn : nu;
  SparseMatrix M(n, n);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

}  // namespace

Eigen::VectorXd solve_transposed(const ForwardSolver& solver, const TangentBlocks& blocks,
                                 const std::vector<char>& d_locked,
                                 const Eigen::VectorXd& pinned_u, int formulation) {
  if (formulation != 1 && formulation != 2) throw InvalidArgument("formulation must be 1 or 2");
  const DofMap& dm = solver.dofs();
  const int nu = dm.num_dofs;
  const int nn = solver.mesh().num_nodes();
  if (pinned_u.size() != static_cast<int>(dm.prescribed.size()))
    throw InvalidArgument("adjoint pin vector does not match prescribed DOFs");

  const int ntot = formulation == 2 ? nu + nn : nu;
  // Slot maps: unknown slots for free u and active d, pinned slots for the rest.
  std::vector<int> unknown(ntot, -1), pinned(ntot, -1);
  int nunk = 0;
  for (int i = 0; i < ntot; ++i) {
    const bool is_pinned = i < nu ? dm.prescribed_index[i] >= 0 : d_locked[i - nu] != 0;
    if (!is_pinned) unknown[i] = nunk++;
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(ntot);
  for (std::size_t k = 0; k < dm.prescribed.size(); ++k) y[dm.prescribed[k]] = pinned_u[static_cast<int>(k)];

  const SparseMatrix M = coupled_matrix(blocks, nu, nn, formulation);
  // Rows of M^T are columns of M; build the unknown block and the pinned coupling.
  std::vector<Eigen::Triplet<double>> tuu;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nunk);
  for (int c = 0; c < M.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(M, c); it; ++it) {
      const int r = static_cast<int>(it.row()), col = static_cast<int>(it.col());
      // Entry (r, col) of M sits at (col, r) of M^T.
      if (unknown[col] < 0) continue;
      if (unknown[r] >= 0)
        tuu.emplace_back(unknown[col], unknown[r], it.value());
      else
        rhs[unknown[col]] -= it.value() * y[r];
    }
  if (rhs.lpNorm<Eigen::Infinity>() == 0.0) {
    return y;  // homogeneous system
  }
  SparseMatrix A(nunk, nunk);
  A.setFromTriplets(tuu.begin(), tuu.end());
  const Eigen::VectorXd x =
      solve_sparse(A, rhs, "adjoint (transposed tangent)", solver.problem().solver.linear_solver);
  for (int i = 0; i < ntot; ++i)
    if (unknown[i] >= 0) y[i] = x[unknown[i]];
  return y;
}

static void split(const Eigen::VectorXd& y, int nu, int nn, Eigen::VectorXd& u, Eigen::VectorXd& d) {
  u = y.head(nu);
  d = y.size() > nu ? Eigen::VectorXd(y.segment(nu, nn)) : Eigen::VectorXd::Zero(nn);
}

AdjointState adjoint_solve(const ForwardSolver& solver, const TangentBlocks& tangents_prev,
                           const std::vector<char>& locked_prev, const TangentBlocks& tangents_n,
                           const std::vector<char>& locked_n, const Eigen::VectorXd& du,
                           int formulation) {
  const int nu = solver.dofs().num_dofs, nn = solver.mesh().num_nodes();
  AdjointState a;
  split(solve_transposed(solver, tangents_n, locked_n, 0.5 * du, formulation), nu, nn, a.lambda_u,
        a.lambda_d);
  split(solve_transposed(solver, tangents_prev, locked_prev, 0.5 * du, formulation), nu, nn, a.mu_u,
        a.mu_d);
  return a;
}

std::vector<AdjointState> adjoint_sweep(const ForwardSolver& solver, const Trajectory& t,
                                        int formulation) {
  const int N = t.size();
  const int nu = solver.dofs().num_dofs, nn = solver.mesh().num_nodes();
  std::vector<AdjointState> out(N);
  // lambda of step n is solved with the step-n tangent.
  std::vector<Eigen::VectorXd> lambda(N + 1);
  std::vector<TangentBlocks> blocks(N + 1);
  for (int n = 0; n <= N; ++n) blocks[n] = solver.tangent_blocks(t.at(n), t.at(n == 0 ? 0 : n - 1));

  for (int n = N; n >= 1; --n) {
    const Eigen::VectorXd du = t.at(n).prescribed - t.at(n - 1).prescribed;
    AdjointState& a = out[n - 1];
    split(solve_transposed(solver, blocks[n], t.at(n).d_locked, 0.5 * du, formulation), nu, nn,
          a.lambda_u, a.lambda_d);
  }
  for (int n = 1; n <= N; ++n) {
    const Eigen::VectorXd du = t.at(n).prescribed - t.at(n - 1).prescribed;
    AdjointState& a = out[n - 1];
    const bool same_increment =
        n >= 2 && (du - (t.at(n - 1).prescribed - t.at(n - 2).prescribed)).lpNorm<Eigen::Infinity>() == 0.0;
    if (same_increment) {
      a.mu_u = out[n - 2].lambda_u;
      a.mu_d = out[n - 2].lambda_d;
    } else {
      split(solve_transposed(solver, blocks[n - 1], t.at(n - 1).d_locked, 0.5 * du, formulation), nu,
            nn, a.mu_u, a.mu_d);
    }
  }
  return out;
}

SensitivityField total_sensitivity(const ForwardSolver& solver, const Trajectory& t,
                                   const std::vector<AdjointState>& adjoints, double lambda_V,
                                   int formulation) {
  if (static_cast<int>(adjoints.size()) != t.size())
    throw InvalidArgument("total_sensitivity: one adjoint state per committed step is required");
  if (formulation != 1 && formulation != 2) throw InvalidArgument("formulation must be 1 or 2");
  const int nu = solver.dofs().num_dofs, nn = solver.mesh().num_nodes();
  const int N = t.size();

  // Weight paired with each residual R^n: lambda^n plus mu^{n+1}.
  std::vector<Eigen::VectorXd> w(N + 1, Eigen::VectorXd::Zero(nu + nn));
  for (int n = 1; n <= N; ++n) {
    const AdjointState& a = adjoints[n - 1];
    w[n].head(nu) += a.lambda_u;
    w[n - 1].head(nu) += a.mu_u;
    if (formulation == 2) {
      w[n].tail(nn) += a.lambda_d;
      w[n - 1].tail(nn) += a.mu_d;
    }
  }
  SensitivityField s;
  s.G_S = Eigen::VectorXd::Zero(nn);
  for (int n = 0; n <= N; ++n) {
    if (w[n].lpNorm<Eigen::Infinity>() == 0.0) continue;
    const SparseMatrix dR = solver.residual_phi_derivative(t.at(n), t.at(n == 0 ? 0 : n - 1));
    s.G_S -= dR.transpose() * w[n];
  }
  s.G_V = lambda_V * dirac_nodal_integral(solver.space(), t.initial.fields.phi,
                                          solver.problem().projection.l_delta);
  s.G_total = s.G_S + s.G_V;
  return s;
}

SensitivityField compute_sensitivity(const ForwardSolver& solver, const Trajectory& trajectory,
                                     double lambda_V, int formulation) {
  return total_sensitivity(solver, trajectory, adjoint_sweep(solver, trajectory, formulation),
                           lambda_V, formulation);
}

Eigen::VectorXd velocity_from_sensitivity(const Eigen::VectorXd& G, bool* degenerate) {
  if (!G.allFinite()) throw InvalidArgument("velocity_from_sensitivity: non-finite sensitivity");
  Eigen::VectorXd v = -G;
  const double mean = G.size() ? v.cwiseAbs().mean() : 0.0;
  const bool flat = !(mean >= 1e-14);
  if (degenerate) *degenerate = flat;
  if (flat) {
    log_warning("velocity normalization skipped: mean |G| below 1e-14");
    return v;
  }
  return v / mean;
}

}  // namespace pftopo
