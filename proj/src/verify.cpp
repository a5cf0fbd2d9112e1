#include "pftopo/verify.hpp"

#include <algorithm>
#include <cmath>

#include "pftopo/errors.hpp"
#include "pftopo/sensitivity.hpp"

namespace pftopo {

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

void summarize(FDReport& r) {
  r.max_rel_error = 0.0;
  r.mean_rel_error = 0.0;
  r.invalid_count = 0;
  int n = 0;
  for (const auto& e : r.entries) {
    if (!e.valid) {
      ++r.invalid_count;
      continue;
    }
    r.max_rel_error = std::max(r.max_rel_error, e.rel_error);
    r.mean_rel_error += e.rel_error;
    ++n;
  }
  if (n > 0) r.mean_rel_error /= n;
}

double lagrangian(const ForwardSolver& solver, const Eigen::VectorXd& phi, double lambda_V, bool* ok) {
  const Trajectory t = solver.run_load_history(phi);
  if (ok) *ok = !t.aborted;
  Projection reg = solver.problem().projection;
  reg.regularized = true;
  return total_objective(solver, t) + lambda_V * projected_volume(solver.space(), phi, reg);
}

double fd_sensitivity(const ForwardSolver& solver, const Eigen::VectorXd& phi,
                      const std::vector<int>& probe_nodes, double delta, double lambda_V, bool* valid) {
  if (!(delta > 0.0)) throw InvalidArgument("perturbation size must be > 0");
  Eigen::VectorXd plus = phi, minus = phi;
  for (int i : probe_nodes) {
    if (i < 0 || i >= phi.size()) throw InvalidArgument("probe node out of range");
    plus[i] += delta;
    minus[i] -= delta;
  }
  bool ok_p = true, ok_m = true;
  const double lp = lagrangian(solver, plus, lambda_V, &ok_p);
  const double lm = lagrangian(solver, minus, lambda_V, &ok_m);
  if (valid) *valid = ok_p && ok_m;
  return -(lp - lm) / (2.0 * delta);
}

std::vector<int> interior_solid_nodes(const Mesh& mesh, const Eigen::VectorXd& phi) {
  std::vector<int> out;
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    bool boundary = false;
    for (int a = 0; a < mesh.dimension; ++a) {
      const double x = mesh.nodes[i][a];
      const double tol = 1e-9 * mesh.extents[a];
      if (x <= tol || x >= mesh.extents[a] - tol) boundary = true;
    }
    if (!boundary && phi[i] >= 0.0) out.push_back(i);
  }
  return out;
}

FDReport compare_sensitivities(const Problem& problem, const Eigen::VectorXd& phi,
                               const std::vector<int>& subset, const SensitivityCheckOptions& opt) {
  Problem exact = problem;
  exact.projection.regularized = false;
  Problem regular = problem;
  regular.projection.regularized = true;
  const ForwardSolver analytic_solver(std::move(exact));
  const ForwardSolver fd_solver(std::move(regular));

  const Trajectory base = analytic_solver.run_load_history(phi);
  if (base.aborted) throw NonConvergence("baseline forward solve failed: " + base.abort_reason, 0.0);
  const SensitivityField sf = compute_sensitivity(analytic_solver, base, opt.lambda_V, opt.formulation);

  FDReport report;
  report.delta = opt.delta;
  report.formulation = opt.formulation;
  report.element_probe = opt.element_probe;
  const Mesh& mesh = analytic_solver.mesh();
  for (int idx : subset) {
    std::vector<int> probe;
    if (opt.element_probe) {
      if (idx < 0 || idx >= mesh.num_elements()) throw InvalidArgument("element index out of range");
      for (int a = 0; a < mesh.nodes_per_element(); ++a) probe.push_back(mesh.elements[idx][a]);
    } else {
      probe.push_back(idx);
    }
    FDEntry e;
    e.index = idx;
    double g = 0.0;
    for (int i : probe) g += sf.G_total[i];
    e.analytic = -g;
    e.fd = fd_sensitivity(fd_solver, phi, probe, opt.delta, opt.lambda_V, &e.valid);
    e.rel_error = relative_error(e.analytic, e.fd);
    report.entries.push_back(e);
  }
  summarize(report);
  return report;
}

namespace {

struct Branch {
  bool plastic;
  bool tensile;
  bool operator==(const Branch& o) const { return plastic == o.plastic && tensile == o.tensile; }
};

Branch branch_of(const StressResult& r) { return {r.plastic, r.trace_eps_e >= 0.0}; }

}  // namespace

double tangent_fd_error(const TangentSample& s, const MaterialParams& p, bool* same_branch) {
  const StressResult base = return_map(s.eps, s.state, s.d, s.phi, p);
  const Vector6 ev = strain_to_voigt(s.eps);
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-8);
  const double h = 1e-6 * scale;
  Matrix6 fd;
  bool same = true;
  for (int j = 0; j < 6; ++j) {
    Vector6 ep = ev, em = ev;
    ep[j] += h;
    em[j] -= h;
    const StressResult rp = return_map(voigt_to_strain(ep), s.state, s.d, s.phi, p);
    const StressResult rm = return_map(voigt_to_strain(em), s.state, s.d, s.phi, p);
    if (!(branch_of(rp) == branch_of(base)) || !(branch_of(rm) == branch_of(base))) same = false;
    fd.col(j) = (stress_to_voigt(rp.sigma) - stress_to_voigt(rm.sigma)) / (2.0 * h);
  }
  if (same_branch) *same_branch = same;
  return (base.tangent - fd).norm() / std::max(fd.norm(), 1e-300);
}

TangentCheckReport fd_tangent_check(const std::vector<TangentSample>& samples, const MaterialParams& p) {
  TangentCheckReport r;
  for (const auto& s : samples) {
    bool same = true;
    const double err = tangent_fd_error(s, p, &same);
    if (!same) {
      ++r.skipped;
      continue;
    }
    const bool plastic = return_map(s.eps, s.state, s.d, s.phi, p).plastic;
    if (plastic) {
      r.max_rel_error_plastic = std::max(r.max_rel_error_plastic, err);
      ++r.plastic_samples;
    } else {
      r.max_rel_error_elastic = std::max(r.max_rel_error_elastic, err);
      ++r.elastic_samples;
    }
  }
  return r;
}

}  // namespace pftopo
