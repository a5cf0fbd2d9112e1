#include "pftopo/forward_solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <sstream>

#include <Eigen/QR>

#include "pftopo/errors.hpp"
#include "pftopo/log.hpp"
#include "pftopo/phasefield.hpp"

namespace pftopo {

namespace {

constexpr int kMaxElementDofs = 3 * kMaxNodesPerElement;
using BMatrix = Eigen::Matrix<double, 6, kMaxElementDofs>;
using ElementVector = Eigen::Matrix<double, kMaxElementDofs, 1>;
using ElementMatrix = Eigen::Matrix<double, kMaxElementDofs, kMaxElementDofs>;
using Triplets = std::vector<Eigen::Triplet<double>>;

void build_b(const QuadPoint& qp, int npe, int dim, BMatrix& B) {
  B.setZero();
  for (int a = 0; a < npe; ++a) {
    const double dx = qp.dNdx(0, a), dy = qp.dNdx(1, a), dz = qp.dNdx(2, a);
    const int c0 = a * dim;
    B(0, c0) = dx;
    B(1, c0 + 1) = dy;
    B(3, c0) = dy;
    B(3, c0 + 1) = dx;
    if (dim == 3) {
      B(2, c0 + 2) = dz;
      B(4, c0 + 1) = dz;
      B(4, c0 + 2) = dy;
      B(5, c0) = dz;
      B(5, c0 + 2) = dx;
    }
  }
}

// Interpolated quantities at one quadrature point.
struct PointFields {
  BMatrix B;
  Matrix3 eps;
  double d = 0.0;
  double phi = 0.0;
  Eigen::Vector3d grad_d = Eigen::Vector3d::Zero();
};

class ElementGather {
 public:
  ElementGather(const FeSpace& space, const FieldSet& fields)
      : space_(space), fields_(fields), mesh_(space.mesh()),
        npe_(mesh_.nodes_per_element()), dim_(mesh_.dimension) {}

  int npe() const { return npe_; }
  int ndof() const { return npe_ * dim_; }
  int udof(int e, int local) const { return mesh_.elements[e][local / dim_] * dim_ + local % dim_; }

  void gather(int e) {
    const auto& conn = mesh_.elements[e];
    ue_.setZero();
    for (int a = 0; a < npe_; ++a) {
      for (int c = 0; c < dim_; ++c) ue_[a * dim_ + c] = fields_.u[conn[a] * dim_ + c];
      de_[a] = fields_.d[conn[a]];
      pe_[a] = fields_.phi[conn[a]];
    }
  }

  void evaluate(int e, int q, PointFields& pf) const {
    const QuadPoint& qp = space_.qp(e, q);
    build_b(qp, npe_, dim_, pf.B);
    const Vector6 ev = pf.B.leftCols(ndof()) * ue_.head(ndof());
    pf.eps = voigt_to_strain(ev);
    pf.d = 0.0;
    pf.phi = 0.0;
    pf.grad_d.setZero();
    for (int a = 0; a < npe_; ++a) {
      pf.d += qp.N[a] * de_[a];
      pf.phi += qp.N[a] * pe_[a];
      pf.grad_d += qp.dNdx.col(a) * de_[a];
    }
    pf.d = std::clamp(pf.d, 0.0, 1.0);
  }

 private:
  const FeSpace& space_;
  const FieldSet& fields_;
  const Mesh& mesh_;
  int npe_, dim_;
  ElementVector ue_;
  Eigen::Matrix<double, kMaxNodesPerElement, 1> de_, pe_;
};

FractureConstants fracture_constants(const MaterialParams& m) {
  return FractureConstants{m.psi_c, m.l_f, m.zeta, m.eta_f};
}

}  // namespace

ForwardSolver::ForwardSolver(Problem problem) : problem_(std::move(problem)), space_(problem_.mesh) {
  problem_.material.validate();
  if (!(problem_.material.psi_c > 0.0)) throw InvalidArgument("psi_c must be > 0");
  if (!(problem_.tau_f > 0.0)) throw InvalidArgument("tau_f must be > 0");
  if (problem_.n_steps < 1) throw InvalidArgument("step count must be >= 1");

  const int dim = problem_.mesh.dimension;
  dofs_.num_dofs = problem_.mesh.num_nodes() * dim;
  std::map<int, double> presc;
  for (const auto& bc : problem_.dirichlet) {
    if (bc.component < 0 || bc.component >= dim)
      throw InvalidArgument("Dirichlet component out of range for region '" + bc.region + "'");
    for (int node : problem_.mesh.node_set(bc.region)) {
      const int dof = node * dim + bc.component;
      auto it = presc.find(dof);
      if (it != presc.end() && it->second != bc.increment)
        throw InvalidArgument("conflicting Dirichlet increments on region '" + bc.region + "'");
      presc[dof] = bc.increment;
    }
  }
  dofs_.increments.resize(static_cast<int>(presc.size()));
  dofs_.prescribed_index.assign(dofs_.num_dofs, -1);
  dofs_.free_index.assign(dofs_.num_dofs, -1);
  int k = 0;
  for (const auto& [dof, inc] : presc) {
    dofs_.prescribed.push_back(dof);
    dofs_.prescribed_index[dof] = k;
    dofs_.increments[k] = inc;
    if (inc != 0.0) dofs_.loaded.push_back(k);
    ++k;
  }
  for (int dof = 0; dof < dofs_.num_dofs; ++dof)
    if (dofs_.prescribed_index[dof] < 0) {
      dofs_.free_index[dof] = static_cast<int>(dofs_.free_dofs.size());
      dofs_.free_dofs.push_back(dof);
    }
  if (!problem_.load_region.empty()) (void)problem_.mesh.node_set(problem_.load_region);
  for (const auto& r : problem_.pinned_regions) (void)problem_.mesh.node_set(r);
}

std::vector<int> ForwardSolver::pinned_phi_nodes() const {
  std::vector<int> out;
  if (!problem_.load_region.empty()) {
    const auto& s = problem_.mesh.node_set(problem_.load_region);
    out.insert(out.end(), s.begin(), s.end());
  }
  for (const auto& r : problem_.pinned_regions) {
    const auto& s = problem_.mesh.node_set(r);
    out.insert(out.end(), s.begin(), s.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void ForwardSolver::fill_load_summary(StepRecord& rec) const {
  rec.load_displacement = 0.0;
  rec.load_reaction = 0.0;
  if (!dofs_.loaded.empty()) rec.load_displacement = rec.prescribed[dofs_.loaded.front()];
  for (int k : dofs_.loaded) rec.load_reaction += rec.fields.reactions[k];
}

StepRecord ForwardSolver::initial_state(const Eigen::VectorXd& phi) const {
  if (phi.size() != problem_.mesh.num_nodes()) throw InvalidArgument("phi size does not match mesh");
  StepRecord rec;
  rec.fields.u = Eigen::VectorXd::Zero(dofs_.num_dofs);
  rec.fields.d = Eigen::VectorXd::Zero(problem_.mesh.num_nodes());
  rec.fields.phi = phi;
  rec.states.assign(num_qp_total(), QuadState{});
  rec.prescribed = prescribed_values(0);
  rec.d_locked.assign(problem_.mesh.num_nodes(), 0);
  const UAssembly ua = assemble_u(rec.fields, rec.states, false);
  rec.fields.reactions.resize(static_cast<int>(dofs_.prescribed.size()));
  for (std::size_t k = 0; k < dofs_.prescribed.size(); ++k)
    rec.fields.reactions[static_cast<int>(k)] = ua.internal[dofs_.prescribed[k]];
  fill_load_summary(rec);
  return rec;
}

ForwardSolver::UAssembly ForwardSolver::assemble_u(const FieldSet& fields,
                                                   const std::vector<QuadState>& states_n,
                                                   bool with_tangent) const {
  const Mesh& m = problem_.mesh;
  const int nq = space_.num_qp();
  const int dim = m.dimension;
  const MaterialParams& mat = problem_.material;
  const bool has_body = problem_.body_force.squaredNorm() > 0.0;

  UAssembly out;
  out.internal = Eigen::VectorXd::Zero(dofs_.num_dofs);
  Eigen::VectorXd external = Eigen::VectorXd::Zero(dofs_.num_dofs);
  Triplets trip;
  ElementGather eg(space_, fields);
  const int nd = eg.ndof();
  if (with_tangent) trip.reserve(static_cast<std::size_t>(m.num_elements()) * nd * nd);

  PointFields pf;
  for (int e = 0; e < m.num_elements(); ++e) {
    eg.gather(e);
    ElementVector fe = ElementVector::Zero(), be = ElementVector::Zero();
    ElementMatrix ke = ElementMatrix::Zero();
    for (int q = 0; q < nq; ++q) {
      eg.evaluate(e, q, pf);
      const QuadPoint& qp = space_.qp(e, q);
      const StressResult sr =
          return_map(pf.eps, states_n[e * nq + q], pf.d, pf.phi, mat, problem_.projection);
      const auto Bl = pf.B.leftCols(nd);
      fe.head(nd) += Bl.transpose() * stress_to_voigt(sr.sigma) * qp.JxW;
      if (with_tangent) ke.topLeftCorner(nd, nd) += Bl.transpose() * sr.tangent * Bl * qp.JxW;
      if (has_body)
        for (int a = 0; a < eg.npe(); ++a)
          for (int c = 0; c < dim; ++c)
            be[a * dim + c] += sr.f * qp.N[a] * problem_.body_force[c] * qp.JxW;
    }
    for (int i = 0; i < nd; ++i) {
      const int gi = eg.udof(e, i);
      out.internal[gi] += fe[i];
      external[gi] += be[i];
      if (with_tangent)
        for (int j = 0; j < nd; ++j) trip.emplace_back(gi, eg.udof(e, j), ke(i, j));
    }
  }
  out.residual = out.internal - external;
  if (with_tangent) {
    out.K_uu.resize(dofs_.num_dofs, dofs_.num_dofs);
    out.K_uu.setFromTriplets(trip.begin(), trip.end());
  }
  return out;
}

std::vector<double> ForwardSolver::trial_history(const FieldSet& fields,
                                                 const std::vector<QuadState>& states_n) const {
  const Mesh& m = problem_.mesh;
  const int nq = space_.num_qp();
  const FractureConstants fc = fracture_constants(problem_.material);
  std::vector<double> h(num_qp_total());
  ElementGather eg(space_, fields);
  PointFields pf;
  for (int e = 0; e < m.num_elements(); ++e) {
    eg.gather(e);
    for (int q = 0; q < nq; ++q) {
      eg.evaluate(e, q, pf);
      const QuadState& s = states_n[e * nq + q];
      const StressResult sr = return_map(pf.eps, s, pf.d, pf.phi, problem_.material, problem_.projection);
      h[e * nq + q] = update_history(s.history, driving_force(sr.psi_plus, sr.psi_p, fc));
    }
  }
  return h;
}

ForwardSolver::DAssembly ForwardSolver::assemble_d(const FieldSet& fields,
                                                   const Eigen::VectorXd& d_previous,
                                                   const std::vector<double>& history) const {
  const Mesh& m = problem_.mesh;
  const int nq = space_.num_qp();
  const int npe = m.nodes_per_element();
  const MaterialParams& mat = problem_.material;
  const double A = 1.0 - mat.kappa;
  const double visc = mat.eta_f / problem_.tau_f;
  const double l2 = mat.l_f * mat.l_f;

  DAssembly out;
  out.residual = Eigen::VectorXd::Zero(m.num_nodes());
  Triplets trip;
  trip.reserve(static_cast<std::size_t>(m.num_elements()) * npe * npe);
  for (int e = 0; e < m.num_elements(); ++e) {
    const auto& conn = m.elements[e];
    Eigen::Matrix<double, kMaxNodesPerElement, kMaxNodesPerElement> ke;
    ke.setZero();
    Eigen::Matrix<double, kMaxNodesPerElement, 1> re = Eigen::Matrix<double, kMaxNodesPerElement, 1>::Zero();
    for (int q = 0; q < nq; ++q) {
      const QuadPoint& qp = space_.qp(e, q);
      double phi = 0.0;
      Eigen::Vector3d gd = Eigen::Vector3d::Zero();
      for (int a = 0; a < npe; ++a) {
        phi += qp.N[a] * fields.phi[conn[a]];
        gd += qp.dNdx.col(a) * fields.d[conn[a]];
      }
      const double f = transition_from_heaviside(problem_.projection.heaviside(phi), mat.kappa);
      const double H = history[e * nq + q];
      // Reaction terms use nodal quadrature (row-sum lumping) so that K_dd is
      // an M-matrix and d stays within [0, 1] without clamping.
      const double diag = f * A * H + 1.0 + visc;
      for (int a = 0; a < npe; ++a) {
        const double da = fields.d[conn[a]], dpa = d_previous[conn[a]];
        const double local = f * A * (da - 1.0) * H + da + visc * (da - dpa);
        re[a] += (local * qp.N[a] + l2 * f * qp.dNdx.col(a).dot(gd)) * qp.JxW;
        ke(a, a) += diag * qp.N[a] * qp.JxW;
        for (int b = 0; b < npe; ++b)
          ke(a, b) += l2 * f * qp.dNdx.col(a).dot(qp.dNdx.col(b)) * qp.JxW;
      }
    }
    for (int a = 0; a < npe; ++a) {
      out.residual[conn[a]] += re[a];
      for (int b = 0; b < npe; ++b) trip.emplace_back(conn[a], conn[b], ke(a, b));
    }
  }
  out.K_dd.resize(m.num_nodes(), m.num_nodes());
  out.K_dd.setFromTriplets(trip.begin(), trip.end());
  return out;
}

double ForwardSolver::free_residual_norm(const Eigen::VectorXd& r) const {
  double s = 0.0;
  for (int dof : dofs_.free_dofs) s += r[dof] * r[dof];
  return std::sqrt(s);
}

SparseMatrix ForwardSolver::restrict_free(const SparseMatrix& K) const {
  Triplets trip;
  trip.reserve(K.nonZeros());
  for (int c = 0; c < K.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(K, c); it; ++it) {
      const int r = dofs_.free_index[it.row()], cc = dofs_.free_index[it.col()];
      if (r >= 0 && cc >= 0) trip.emplace_back(r, cc, it.value());
    }
  const int nf = static_cast<int>(dofs_.free_dofs.size());
  SparseMatrix out(nf, nf);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

double ForwardSolver::projected_d_residual_norm(const Eigen::VectorXd& r, const Eigen::VectorXd& d,
                                                const Eigen::VectorXd& d_n) const {
  // Components pushing against an active bound are not equations.
  double s = 0.0;
  for (int i = 0; i < r.size(); ++i) {
    if (d[i] <= d_n[i] && r[i] > 0.0) continue;
    if (d[i] >= 1.0 && r[i] < 0.0) continue;
    s += r[i] * r[i];
  }
  return std::sqrt(s);
}

int ForwardSolver::newton_solve(FieldSet& fields, const std::vector<QuadState>& states_n) const {
  const SolverOptions& opt = problem_.solver;
  double r0 = 0.0, norm = 0.0;
  UAssembly ua = assemble_u(fields, states_n, true);
  norm = free_residual_norm(ua.residual);
  r0 = norm;
  for (int it = 0; it <= opt.newton_max_iterations; ++it) {
    if (!std::isfinite(norm)) throw NumericalFailure("Newton: non-finite displacement residual");
    if (norm <= std::max(opt.newton_abs_tol, opt.newton_rel_tol * r0)) return it;
    if (it == opt.newton_max_iterations) break;
    Eigen::VectorXd rf(static_cast<int>(dofs_.free_dofs.size()));
    for (std::size_t k = 0; k < dofs_.free_dofs.size(); ++k) rf[static_cast<int>(k)] = ua.residual[dofs_.free_dofs[k]];
    const Eigen::VectorXd du = solve_sparse(restrict_free(ua.K_uu), rf, "displacement Newton",
                                            opt.linear_solver);
    // Backtracking on the residual norm; the energy split is only piecewise
    // smooth, so full steps can cycle across the tr(eps) = 0 kink.
    const Eigen::VectorXd u0 = fields.u;
    double step = 1.0;
    for (int ls = 0;; ++ls) {
      fields.u = u0;
      for (std::size_t k = 0; k < dofs_.free_dofs.size(); ++k)
        fields.u[dofs_.free_dofs[k]] -= step * du[static_cast<int>(k)];
      ua = assemble_u(fields, states_n, true);
      const double trial = free_residual_norm(ua.residual);
      if ((std::isfinite(trial) && trial < (1.0 - 1e-4 * step) * norm) || ls == 12) {
        norm = trial;
        break;
      }
      step *= 0.5;
    }
  }
  throw NonConvergence("Newton iteration cap reached for the displacement subproblem", norm);
}

void ForwardSolver::solve_d_bounded(const DAssembly& da, const Eigen::VectorXd& d_n, StepRecord& rec) const {
  // Primal-dual active set on d_n <= d <= 1; the subproblem is linear for fixed history.
  const SolverOptions& opt = problem_.solver;
  const int n = static_cast<int>(d_n.size());
  const Eigen::VectorXd d0 = rec.fields.d;
  // Linear system K d = b with b = K d0 - R(d0).
  const Eigen::VectorXd b = da.K_dd * d0 - da.residual;
  std::vector<signed char> act(n, 0);  // -1 lower bound, +1 upper bound
  Eigen::VectorXd d = d0;
  for (int pass = 0; pass < 100; ++pass) {
    std::vector<int> idx(n, -1), freeset;
    for (int i = 0; i < n; ++i)
      if (act[i] == 0) {
        idx[i] = static_cast<int>(freeset.size());
        freeset.push_back(i);
      } else {
        d[i] = act[i] < 0 ? d_n[i] : 1.0;
      }
    const int nf = static_cast<int>(freeset.size());
    Eigen::VectorXd rhs(nf);
    for (int k = 0; k < nf; ++k) rhs[k] = b[freeset[k]];
    std::vector<Eigen::Triplet<double>> trip;
    for (int c = 0; c < da.K_dd.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(da.K_dd, c); it; ++it) {
        const int r = static_cast<int>(it.row()), cc = static_cast<int>(it.col());
        if (idx[r] < 0) continue;
        if (idx[cc] >= 0) trip.emplace_back(idx[r], idx[cc], it.value());
        else rhs[idx[r]] -= it.value() * d[cc];
      }
    SparseMatrix Kf(nf, nf);
    Kf.setFromTriplets(trip.begin(), trip.end());
    const Eigen::VectorXd df = nf > 0 ? solve_sparse(Kf, rhs, "phase-field", opt.linear_solver)
                                      : Eigen::VectorXd();
    for (int k = 0; k < nf; ++k) d[freeset[k]] = df[k];
    if (pass == 0)
      for (int i = 0; i < n; ++i)
        rec.clamp_overshoot = std::max({rec.clamp_overshoot, d_n[i] - d[i], d[i] - 1.0});
    const Eigen::VectorXd r = da.K_dd * d - b;
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      signed char next = act[i];
      if (act[i] == 0) {
        if (d[i] < d_n[i]) next = -1;
        else if (d[i] > 1.0) next = 1;
      } else if (act[i] < 0 && r[i] < 0.0) {
        next = 0;
      } else if (act[i] > 0 && r[i] > 0.0) {
        next = 0;
      }
      if (next != act[i]) {
        act[i] = next;
        changed = true;
      }
    }
    if (!changed) break;
  }
  for (int i = 0; i < n; ++i) {
    rec.fields.d[i] = std::clamp(d[i], d_n[i], 1.0);
    rec.d_locked[i] = act[i] != 0 ? 1 : 0;
  }
}

StepRecord ForwardSolver::staggered_step(const StepRecord& previous, int step) const {
  const SolverOptions& opt = problem_.solver;
  const std::vector<QuadState>& states_n = previous.states;
  const Eigen::VectorXd& d_n = previous.fields.d;

  StepRecord rec;
  rec.fields = previous.fields;
  rec.prescribed = prescribed_values(step);
  for (std::size_t k = 0; k < dofs_.prescribed.size(); ++k)
    rec.fields.u[dofs_.prescribed[k]] = rec.prescribed[static_cast<int>(k)];
  rec.d_locked.assign(problem_.mesh.num_nodes(), 0);

  auto residual = [&](const FieldSet& f) {
    const UAssembly ua = assemble_u(f, states_n, false);
    const DAssembly da = assemble_d(f, d_n, trial_history(f, states_n));
    return free_residual_norm(ua.residual) + projected_d_residual_norm(da.residual, f.d, d_n);
  };

  const double ref = residual(rec.fields);
  if (!std::isfinite(ref)) throw NumericalFailure("staggered step: non-finite predictor residual");
  double res = ref;
  const double tol = std::max(opt.stagger_rel_tol * ref, opt.stagger_abs_tol);
  // Equilibrate u at the previous crack field so the first d-solve sees a
  // realistic strain rather than the raw boundary jump.
  rec.newton_iterations += newton_solve(rec.fields, states_n);
  // Anderson mixing on the fixed-point map d -> dsolve(H(u(d))).
  const int depth = opt.stagger_anderson_depth;
  std::deque<Eigen::VectorXd> dF, dG;
  Eigen::VectorXd f_prev, g_prev;
  double res_prev = res;
  int k = 0;
  while (k == 0 || res > tol) {
    if (k == opt.stagger_max_iterations) {
      std::ostringstream msg;
      msg << "staggered scheme did not converge at step " << step << " (residual " << res
          << ", tolerance " << tol << ")";
      throw NonConvergence(msg.str(), res);
    }
    ++k;
    // Phase-field solve with the history of the current displacement.
    const std::vector<double> H = trial_history(rec.fields, states_n);
    const DAssembly da = assemble_d(rec.fields, d_n, H);
    const Eigen::VectorXd x = rec.fields.d;
    rec.clamp_overshoot = 0.0;
    solve_d_bounded(da, d_n, rec);
    if (depth > 0) {
      const Eigen::VectorXd g = rec.fields.d;
      const Eigen::VectorXd fk = g - x;
      if (res > res_prev) {
        dF.clear();
        dG.clear();
      } else if (k > 1) {
        dF.push_back(fk - f_prev);
        dG.push_back(g - g_prev);
        if (static_cast<int>(dF.size()) > depth) {
          dF.pop_front();
          dG.pop_front();
        }
      }
      f_prev = fk;
      g_prev = g;
      if (!dF.empty()) {
        const int mcols = static_cast<int>(dF.size());
        Eigen::MatrixXd F(g.size(), mcols), G(g.size(), mcols);
        for (int j = 0; j < mcols; ++j) {
          F.col(j) = dF[j];
          G.col(j) = dG[j];
        }
        const Eigen::VectorXd gamma = F.colPivHouseholderQr().solve(fk);
        Eigen::VectorXd mixed = g - G * gamma;
        for (int i = 0; i < mixed.size(); ++i) mixed[i] = std::clamp(mixed[i], d_n[i], 1.0);
        if (mixed.allFinite()) rec.fields.d = mixed;
      }
    }
    res_prev = res;
    rec.newton_iterations += newton_solve(rec.fields, states_n);
    res = residual(rec.fields);
  }
  rec.stagger_iterations = k;

  // Commit internal variables and history at the converged state.
  const std::vector<double> H = trial_history(rec.fields, states_n);
  const Mesh& m = problem_.mesh;
  const int nq = space_.num_qp();
  rec.states.resize(num_qp_total());
  ElementGather eg(space_, rec.fields);
  PointFields pf;
  for (int e = 0; e < m.num_elements(); ++e) {
    eg.gather(e);
    for (int q = 0; q < nq; ++q) {
      eg.evaluate(e, q, pf);
      const StressResult sr =
          return_map(pf.eps, states_n[e * nq + q], pf.d, pf.phi, problem_.material, problem_.projection);
      rec.states[e * nq + q] = sr.new_state;
      rec.states[e * nq + q].history = H[e * nq + q];
    }
  }
  const UAssembly ua = assemble_u(rec.fields, states_n, false);
  rec.fields.reactions.resize(static_cast<int>(dofs_.prescribed.size()));
  for (std::size_t j = 0; j < dofs_.prescribed.size(); ++j)
    rec.fields.reactions[static_cast<int>(j)] = ua.internal[dofs_.prescribed[j]];
  if (!rec.fields.reactions.allFinite()) throw NumericalFailure("non-finite reactions");
  fill_load_summary(rec);
  if (rec.clamp_overshoot > 1e-3)
    log_warning("step " + std::to_string(step) + ": phase-field clamp overshoot " +
                std::to_string(rec.clamp_overshoot));
  return rec;
}

Trajectory ForwardSolver::run_load_history(const Eigen::VectorXd& phi, int n_steps) const {
  if (n_steps <= 0) n_steps = problem_.n_steps;
  Trajectory t;
  t.tau_f = problem_.tau_f;
  t.initial = initial_state(phi);
  t.steps.reserve(n_steps);
  for (int n = 1; n <= n_steps; ++n) {
    try {
      t.steps.push_back(staggered_step(t.at(n - 1), n));
    } catch (const NonConvergence& ex) {
      t.aborted = true;
      t.abort_reason = ex.what();
      log_warning(std::string("load history aborted: ") + ex.what());
      break;
    }
  }
  return t;
}

TangentBlocks ForwardSolver::tangent_blocks(const StepRecord& step, const StepRecord& previous) const {
  const Mesh& m = problem_.mesh;
  const int nq = space_.num_qp();
  const int npe = m.nodes_per_element();
  const MaterialParams& mat = problem_.material;
  const FractureConstants fc = fracture_constants(mat);
  const double A = 1.0 - mat.kappa;
  const int nn = m.num_nodes();

  TangentBlocks tb;
  tb.K_uu = assemble_u(step.fields, previous.states, true).K_uu;
  std::vector<double> H(num_qp_total());
  for (int i = 0; i < num_qp_total(); ++i) H[i] = step.states[i].history;
  tb.K_dd = assemble_d(step.fields, previous.fields.d, H).K_dd;

  Triplets ud, du;
  ElementGather eg(space_, step.fields);
  const int nd = eg.ndof();
  PointFields pf;
  for (int e = 0; e < m.num_elements(); ++e) {
    eg.gather(e);
    const auto& conn = m.elements[e];
    for (int q = 0; q < nq; ++q) {
      eg.evaluate(e, q, pf);
      const QuadPoint& qp = space_.qp(e, q);
      const QuadState& s = previous.states[e * nq + q];
      const StressResult sr = return_map(pf.eps, s, pf.d, pf.phi, mat, problem_.projection);
      const auto Bl = pf.B.leftCols(nd);

      // d(R_u)/d(d): B^T f g'(d) sigma_eff_plus N_b
      const ElementVector col =
          (Bl.transpose() * stress_to_voigt(sr.sigma_eff_plus)) * (sr.f * degradation_g_prime(pf.d, mat.kappa));
      for (int i = 0; i < nd; ++i)
        for (int b = 0; b < npe; ++b)
          ud.emplace_back(eg.udof(e, i), conn[b], col[i] * qp.N[b] * qp.JxW);

      // d(R_d)/du through the history, active only where it grows.
      const double D = driving_force(sr.psi_plus, sr.psi_p, fc);
      if (D > s.history) {
        const double slope = driving_force_slope(sr.psi_plus, sr.psi_p, fc);
        const ElementVector dH = Bl.transpose() * stress_to_voigt(sr.drive_gradient) * slope;
        for (int a = 0; a < npe; ++a) {
          const double coeff = sr.f * A * (step.fields.d[conn[a]] - 1.0);
          for (int j = 0; j < nd; ++j)
            du.emplace_back(conn[a], eg.udof(e, j), coeff * qp.N[a] * dH[j] * qp.JxW);
        }
      }
    }
  }
  tb.K_ud.resize(dofs_.num_dofs, nn);
  tb.K_ud.setFromTriplets(ud.begin(), ud.end());
  tb.K_du.resize(nn, dofs_.num_dofs);
  tb.K_du.setFromTriplets(du.begin(), du.end());
  return tb;
}

SparseMatrix ForwardSolver::residual_phi_derivative(const StepRecord& step,
                                                    const StepRecord& previous) const {
  const Mesh& m = problem_.mesh;
  const int nq = space_.num_qp();
  const int npe = m.nodes_per_element();
  const int dim = m.dimension;
  const MaterialParams& mat = problem_.material;
  const double A = 1.0 - mat.kappa;
  const double l2 = mat.l_f * mat.l_f;
  const double l_delta = problem_.projection.l_delta;
  const int nu = dofs_.num_dofs;
  const bool has_body = problem_.body_force.squaredNorm() > 0.0;

  Triplets trip;
  ElementGather eg(space_, step.fields);
  const int nd = eg.ndof();
  PointFields pf;
  for (int e = 0; e < m.num_elements(); ++e) {
    eg.gather(e);
    const auto& conn = m.elements[e];
    for (int q = 0; q < nq; ++q) {
      eg.evaluate(e, q, pf);
      const QuadPoint& qp = space_.qp(e, q);
      const QuadState& s_prev = previous.states[e * nq + q];
      const double fprime =
          2.0 * A * problem_.projection.heaviside(pf.phi) * dirac_regularized(pf.phi, l_delta);
      if (fprime == 0.0) continue;
      const StressResult sr = return_map(pf.eps, s_prev, pf.d, pf.phi, mat, problem_.projection);
      const Matrix3 undegraded = sr.g * sr.sigma_eff_plus + sr.sigma_eff_minus;
      const ElementVector fu = pf.B.leftCols(nd).transpose() * stress_to_voigt(undegraded);
      const double H = step.states[e * nq + q].history;
      for (int b = 0; b < npe; ++b) {
        const double w = fprime * qp.N[b] * qp.JxW;
        for (int i = 0; i < nd; ++i) {
          const int gi = eg.udof(e, i);
          double v = fu[i];
          if (has_body && dofs_.free_index[gi] >= 0) v -= qp.N[i / dim] * problem_.body_force[i % dim];
          trip.emplace_back(gi, conn[b], v * w);
        }
        for (int a = 0; a < npe; ++a) {
          const double rd = A * (step.fields.d[conn[a]] - 1.0) * H * qp.N[a] + l2 * qp.dNdx.col(a).dot(pf.grad_d);
          trip.emplace_back(nu + conn[a], conn[b], rd * w);
        }
      }
    }
  }
  SparseMatrix out(nu + m.num_nodes(), m.num_nodes());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

}  // namespace pftopo
