#include "pftopo/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "pftopo/errors.hpp"
#include "pftopo/log.hpp"
#include "pftopo/sensitivity.hpp"

namespace pftopo {

void OptimizerSettings::validate() const {
  topo.validate();
  if (!(theta_v > 0.0 && theta_v <= 1.0)) throw InvalidArgument("Theta_v must lie in (0, 1]");
  if (!(target_volume > 0.0 && target_volume <= 1.0))
    throw InvalidArgument("target volume must lie in (0, 1]");
  if (formulation != 1 && formulation != 2) throw InvalidArgument("formulation must be 1 or 2");
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
  if (!(bisection_tol > 0.0) || bisection_max_iterations < 2)
    throw InvalidArgument("bisection tolerance must be > 0 and the cap >= 2");
  if (!(lambda_lower > 0.0 && lambda_lower <= lambda_upper))
    throw InvalidArgument("lambda bracket must satisfy 0 < lower <= upper");
}

double expected_volume(double chi_prev, double target, double theta_v) {
  return chi_prev - theta_v * (chi_prev - target);
}

BisectionResult bisection_step(OptimizerState& st, const Eigen::VectorXd& G_S,
                               const Eigen::VectorXd& volume_density, const ReactionDiffusion& rd,
                               const FeSpace& space, const OptimizerSettings& settings) {
  BisectionResult r;
  st.lambda_l = settings.lambda_lower;
  st.lambda_u = std::max(settings.lambda_upper, 1e4 * st.lambda_V);
  double previous = 0.0;
  for (int k = 1; k <= settings.bisection_max_iterations; ++k) {
    const double lambda = std::sqrt(st.lambda_l * st.lambda_u);
    const Eigen::VectorXd G = G_S + lambda * volume_density;
    bool flat = false;
    const Eigen::VectorXd v = velocity_from_sensitivity(G, &flat);
    r.phi = rd.solve(st.phi, v);
    r.chi = volume_ratio(space, r.phi);
    r.lambda_V = lambda;
    r.iterations = k;
    r.lambda_trace.push_back(lambda);
    if (r.chi >= st.expected_volume)
      st.lambda_l = lambda;
    else
      st.lambda_u = lambda;
    if (st.lambda_l > st.lambda_u) r.bracket_ok = false;
    if (k > 1 && std::abs(lambda - previous) / std::abs(lambda + previous) <= settings.bisection_tol) {
      r.converged = true;
      break;
    }
    previous = lambda;
  }
  if (!r.converged) log_warning("bisection reached its iteration cap without converging");
  st.lambda_V = r.lambda_V;
  r.lambda_l = st.lambda_l;
  r.lambda_u = st.lambda_u;
  return r;
}

double max_solid_damage(const StepRecord& step) {
  double m = 0.0;
  for (int i = 0; i < step.fields.d.size(); ++i)
    if (step.fields.phi[i] >= 0.0) m = std::max(m, step.fields.d[i]);
  return m;
}

double fracture_onset(const Trajectory& t, double threshold) {
  for (int n = 1; n <= t.size(); ++n)
    if (max_solid_damage(t.at(n)) > threshold) return std::abs(t.at(n).load_displacement);
  return std::numeric_limits<double>::infinity();
}

OptimizationResult run_optimization(const ForwardSolver& solver, const OptimizerSettings& settings_in,
                                    const Eigen::VectorXd& phi0, const IterationCallback& on_iteration) {
  OptimizerSettings settings = settings_in;
  if (!(settings.r_min > 0.0)) settings.r_min = 3.0 * solver.problem().material.l_f;
  settings.validate();

  const FeSpace& space = solver.space();
  const FilterKernel kernel = build_kernel(solver.mesh(), settings.r_min);
  const std::vector<int> pinned = solver.pinned_phi_nodes();
  const ReactionDiffusion rd(space, settings.topo, pinned, solver.problem().solver.linear_solver);
  const Eigen::VectorXd lumped = space.lumped_measure();

  OptimizerState st;
  st.phi = phi0;
  for (int p : pinned) st.phi[p] = 1.0;
  st.target_volume = settings.target_volume;
  st.theta_v = settings.theta_v;
  st.lambda_l = settings.lambda_lower;
  st.lambda_u = settings.lambda_upper;

  OptimizationResult out;
  int stagnant = 0;
  for (int m = 1; m <= settings.max_iterations; ++m) {
    const auto t0 = std::chrono::steady_clock::now();
    Trajectory traj = solver.run_load_history(st.phi);
    ConvergenceRecord rec;
    rec.iteration = m;
    rec.chi = volume_ratio(space, st.phi);
    if (traj.aborted) {
      out.aborted = true;
      out.stop_reason = "forward solve failed at iteration " + std::to_string(m) + ": " + traj.abort_reason;
      out.phi = st.phi;
      out.last_trajectory = std::move(traj);
      return out;
    }
    rec.objective = total_objective(solver, traj);
    for (const auto& s : traj.steps) {
      rec.stagger_total += s.stagger_iterations;
      rec.stagger_max = std::max(rec.stagger_max, s.stagger_iterations);
      rec.max_d = std::max(rec.max_d, max_solid_damage(s));
      for (const QuadState& q : s.states) rec.max_alpha = std::max(rec.max_alpha, q.alpha);
    }
    rec.onset_displacement = fracture_onset(traj, settings.onset_threshold);
    st.objective_history.push_back(rec.objective);
    if (m == 1) out.first_trajectory = traj;

    // Termination is decided on the analyzed design.
    bool stop = false;
    if (m >= 2) {
      const double prev = st.objective_history[m - 2];
      const double rel = std::abs(rec.objective - prev) / std::max(std::abs(prev), 1e-300);
      stagnant = rel < settings.stagnation_tol ? stagnant + 1 : 0;
    }
    const bool volume_ok = std::abs(rec.chi - settings.target_volume) <= settings.volume_tol;
    if (settings.target_volume >= 1.0 && rec.chi >= 1.0) {
      stop = true;
      out.stop_reason = "target volume equals the full domain";
    } else if (stagnant >= settings.stagnation_count && volume_ok) {
      stop = true;
      out.stop_reason = "objective stagnated with the volume constraint satisfied";
    }

    if (!stop) {
      const SensitivityField sf = compute_sensitivity(solver, traj, 0.0, settings.formulation);
      const Eigen::VectorXd density = sf.G_S.cwiseQuotient(lumped);
      const Eigen::VectorXd filtered = filter_field(kernel, density);
      const auto& h = st.sensitivity_history;
      const Eigen::VectorXd averaged =
          m > 2 ? history_average(filtered, h[h.size() - 1], h[h.size() - 2], m) : filtered;
      st.sensitivity_history.push_back(averaged);
      if (st.sensitivity_history.size() > 2)
        st.sensitivity_history.erase(st.sensitivity_history.begin());

      const Eigen::VectorXd volume_density =
          dirac_nodal_integral(space, st.phi, settings.topo.l_delta).cwiseQuotient(lumped);
      st.expected_volume = expected_volume(rec.chi, settings.target_volume, settings.theta_v);
      const BisectionResult br = bisection_step(st, averaged, volume_density, rd, space, settings);
      rec.lambda_V = br.lambda_V;
      rec.bisection_iterations = br.iterations;
      rec.bisection_converged = br.converged;
      rec.bracket_ok = br.bracket_ok;
      rec.expected_volume = st.expected_volume;
      rec.chi_next = br.chi;
      if (!br.bracket_ok) log_warning("lambda bracket ordering violated");
      st.phi = br.phi;
    } else {
      rec.lambda_V = st.lambda_V;
      rec.expected_volume = rec.chi;
      rec.chi_next = rec.chi;
    }
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream line;
    line << "iter " << m << " J=" << rec.objective << " chi=" << rec.chi << " lambda_V=" << rec.lambda_V
         << " bisect=" << rec.bisection_iterations << " stagger_max=" << rec.stagger_max;
    log_info(line.str());
    out.records.push_back(rec);
    if (on_iteration) on_iteration(rec);
    if (stop) {
      out.converged = true;
      out.phi = traj.initial.fields.phi;
      out.last_trajectory = std::move(traj);
      return out;
    }
    out.last_trajectory = std::move(traj);
  }
  out.stop_reason = "iteration cap reached";
  out.phi = out.last_trajectory.initial.fields.phi;
  return out;
}

}  // namespace pftopo
