#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "pftopo/errors.hpp"
#include "pftopo/io.hpp"
#include "pftopo/log.hpp"
#include "pftopo/sensitivity.hpp"

namespace pftopo {

namespace {

constexpr const char* kOutputEnv = "PFTOPO_OUTPUT_DIR";

std::string step_file(const std::filesystem::path& dir, const std::string& stem, int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04d.vtk", step);
  return (dir / (stem + buf)).string();
}

void write_trajectory_snapshots(const std::filesystem::path& dir, const std::string& stem,
                                const ForwardSolver& solver, const Trajectory& t, int cadence) {
  for (int n : snapshot_steps(cadence, t.size()))
    write_snapshot(step_file(dir, stem, n), solver.space(), t.at(n).fields, t.at(n).states);
}

Eigen::VectorXd solid_start(const ForwardSolver& solver) {
  return Eigen::VectorXd::Ones(solver.mesh().num_nodes());
}

int cmd_forward(const RunConfig& cfg, const std::filesystem::path& out) {
  const ForwardSolver solver(build_problem(cfg));
  const Trajectory t = solver.run_load_history(solid_start(solver));
  write_load_curve((out / "load_displacement.csv").string(), t);
  write_trajectory_snapshots(out, "step", solver, t, cfg.snapshot_every);
  std::cout << "forward-only: " << t.size() << " steps committed, final reaction "
            << format_number(t.at(t.size()).load_reaction) << '\n';
  if (t.aborted) {
    std::cerr << "error: " << t.abort_reason << '\n';
    return 1;
  }
  return 0;
}

int cmd_run(const RunConfig& cfg, const std::filesystem::path& out) {
  const ForwardSolver solver(build_problem(cfg));
  const OptimizationResult r = run_optimization(solver, cfg.optimizer, solid_start(solver));
  write_convergence((out / "convergence.csv").string(), r.records);
  if (r.first_trajectory.size() > 0)
    write_load_curve((out / "load_displacement_initial.csv").string(), r.first_trajectory);
  write_load_curve((out / "load_displacement.csv").string(), r.last_trajectory);
  write_trajectory_snapshots(out, "final_step", solver, r.last_trajectory, cfg.snapshot_every);
  const Trajectory& t = r.last_trajectory;
  write_snapshot((out / "design.vtk").string(), solver.space(), t.at(t.size()).fields, t.at(t.size()).states);
  std::cout << "run: " << r.records.size() << " iterations, " << r.stop_reason << '\n';
  if (r.aborted) {
    std::cerr << "error: " << r.stop_reason << '\n';
    return 1;
  }
  return 0;
}

int cmd_verify(const RunConfig& cfg, const std::filesystem::path& out, const SensitivityCheckOptions& opt,
               double threshold, int max_probes) {
  const Problem problem = build_problem(cfg);
  const Eigen::VectorXd phi = Eigen::VectorXd::Ones(problem.mesh.num_nodes());
  std::vector<int> subset;
  if (opt.element_probe) {
    for (int e = 0; e < problem.mesh.num_elements(); ++e) subset.push_back(e);
  } else {
    subset = interior_solid_nodes(problem.mesh, phi);
  }
  if (max_probes > 0 && static_cast<int>(subset.size()) > max_probes) subset.resize(max_probes);
  const FDReport report = compare_sensitivities(problem, phi, subset, opt);
  write_fd_report((out / "fd_report.csv").string(), report);
  std::cout << "verify-sensitivity: formulation " << opt.formulation << ", " << report.entries.size()
            << " probes, mean relative error " << format_number(report.mean_rel_error) << ", max "
            << format_number(report.max_rel_error) << ", invalid " << report.invalid_count << '\n';
  return (report.invalid_count == 0 && report.mean_rel_error < threshold) ? 0 : 1;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
  CLI::App app{"Level-set topology optimization for fracture resistance"};
  app.require_subcommand(1);
  std::string config_path, output_override;
  bool verbose = false, quiet = false;
  SensitivityCheckOptions vopt;
  double threshold = 1e-2;
  int max_probes = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "JSON configuration file")->required();
    sub->add_option("-o,--output", output_override, "Output directory");
    sub->add_flag("-v,--verbose", verbose, "Per-iteration progress on stderr");
    sub->add_flag("-q,--quiet", quiet, "Suppress warnings");
  };
  CLI::App* run = app.add_subcommand("run", "Full topology optimization");
  common(run);
  CLI::App* fwd = app.add_subcommand("forward-only", "Load history on the undesigned domain");
  common(fwd);
  CLI::App* ver = app.add_subcommand("verify-sensitivity", "Adjoint sensitivities against central differences");
  common(ver);
  ver->add_option("--formulation", vopt.formulation, "1 or 2")->check(CLI::IsMember({1, 2}));
  ver->add_option("--delta", vopt.delta, "Topology perturbation")->check(CLI::PositiveNumber);
  ver->add_option("--lambda-v", vopt.lambda_V, "Volume multiplier in the Lagrangian")->check(CLI::NonNegativeNumber);
  ver->add_flag("--element-probe", vopt.element_probe, "Perturb all nodes of each element");
  ver->add_option("--threshold", threshold, "Pass threshold on the mean relative error");
  ver->add_option("--max-probes", max_probes, "Limit the number of probes (0 = all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  set_log_level(quiet ? LogLevel::Quiet : verbose ? LogLevel::Info : LogLevel::Warning);

  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help();
    return 2;
  }
  std::string out_dir = cfg.output_directory;
  if (const char* env = std::getenv(kOutputEnv); env && *env) out_dir = env;
  if (!output_override.empty()) out_dir = output_override;

  try {
    std::filesystem::create_directories(out_dir);
    if (*run) return cmd_run(cfg, out_dir);
    if (*fwd) return cmd_forward(cfg, out_dir);
    return cmd_verify(cfg, out_dir, vopt, threshold, max_probes);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pftopo
