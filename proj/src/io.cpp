#include "pftopo/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pftopo/errors.hpp"
#include "pftopo/log.hpp"
#include "pftopo/phasefield.hpp"

namespace pftopo {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw InvalidArgument("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) throw InvalidArgument("config: unknown key '" + key + "' in '" + where + "'");
  }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw InvalidArgument("config: missing required key '" + key + "' in '" + where + "'");
  return obj.at(key);
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback) {
  return obj.contains(key) ? obj.at(key).get<T>() : fallback;
}

std::optional<double> get_opt(const json& obj, const std::string& key) {
  if (!obj.contains(key)) return std::nullopt;
  return obj.at(key).get<double>();
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config: parse error: ") + e.what());
  }
  try {
    check_keys(root, "root", {"mesh", "material", "fracture", "topology", "regions", "loading", "solver", "output"});
    RunConfig c;

    const json& mesh = require(root, "mesh", "root");
    check_keys(mesh, "mesh", {"dimension", "counts", "extents"});
    c.dimension = require(mesh, "dimension", "mesh").get<int>();
    c.counts = require(mesh, "counts", "mesh").get<std::vector<int>>();
    c.extents = require(mesh, "extents", "mesh").get<std::vector<double>>();

    const json& mat = require(root, "material", "root");
    check_keys(mat, "material", {"K", "mu", "h", "sigma_Y", "kappa"});
    c.material.bulk = require(mat, "K", "material").get<double>();
    c.material.shear = require(mat, "mu", "material").get<double>();
    c.material.hardening = get_or(mat, "h", 0.0);
    c.material.yield_stress = get_or(mat, "sigma_Y", 1e16);
    c.material.kappa = get_or(mat, "kappa", 1e-8);

    const json& frac = require(root, "fracture", "root");
    check_keys(frac, "fracture", {"psi_c", "sigma_c", "G_c", "l_f", "zeta", "eta_f"});
    c.material.l_f = require(frac, "l_f", "fracture").get<double>();
    c.material.zeta = get_or(frac, "zeta", 1.0);
    c.material.eta_f = get_or(frac, "eta_f", 1e-6);
    c.psi_c = get_opt(frac, "psi_c");
    c.sigma_c = get_opt(frac, "sigma_c");
    c.G_c = get_opt(frac, "G_c");
    const int given = int(c.psi_c.has_value()) + int(c.sigma_c.has_value()) + int(c.G_c.has_value());
    if (given != 1) throw InvalidArgument("config: give exactly one of psi_c, sigma_c, G_c in 'fracture'");
    c.material.psi_c = c.psi_c ? *c.psi_c : critical_psi(c.sigma_c, c.G_c, c.material.young(), c.material.l_f);

    if (root.contains("topology")) {
      const json& t = root.at("topology");
      check_keys(t, "topology",
                 {"eta_Phi", "l_Phi", "tau_Phi", "l_delta", "r_min", "Theta_v", "target_volume", "formulation",
                  "max_iterations", "stagnation_tol", "stagnation_count", "volume_tol", "bisection_tol",
                  "bisection_max_iterations", "onset_threshold"});
      auto& o = c.optimizer;
      o.topo.eta_phi = get_or(t, "eta_Phi", o.topo.eta_phi);
      o.topo.l_phi = get_or(t, "l_Phi", o.topo.l_phi);
      o.topo.tau_phi = get_or(t, "tau_Phi", o.topo.tau_phi);
      o.topo.l_delta = get_or(t, "l_delta", o.topo.l_delta);
      o.r_min = get_or(t, "r_min", 0.0);
      o.theta_v = get_or(t, "Theta_v", o.theta_v);
      o.target_volume = get_or(t, "target_volume", 1.0);
      o.formulation = get_or(t, "formulation", o.formulation);
      o.max_iterations = get_or(t, "max_iterations", o.max_iterations);
      o.stagnation_tol = get_or(t, "stagnation_tol", o.stagnation_tol);
      o.stagnation_count = get_or(t, "stagnation_count", o.stagnation_count);
      o.volume_tol = get_or(t, "volume_tol", o.volume_tol);
      o.bisection_tol = get_or(t, "bisection_tol", o.bisection_tol);
      o.bisection_max_iterations = get_or(t, "bisection_max_iterations", o.bisection_max_iterations);
      o.onset_threshold = get_or(t, "onset_threshold", o.onset_threshold);
    } else {
      c.optimizer.target_volume = 1.0;
    }
    if (!(c.optimizer.r_min > 0.0)) c.optimizer.r_min = 3.0 * c.material.l_f;

    if (root.contains("regions")) {
      const json& regions = root.at("regions");
      if (!regions.is_object()) throw InvalidArgument("config: 'regions' must be an object");
      for (const auto& [name, box] : regions.items()) {
        check_keys(box, "regions." + name, {"min", "max"});
        RegionSpec r;
        r.name = name;
        r.min = require(box, "min", "regions." + name).get<std::vector<double>>();
        r.max = require(box, "max", "regions." + name).get<std::vector<double>>();
        if (static_cast<int>(r.min.size()) != c.dimension || static_cast<int>(r.max.size()) != c.dimension)
          throw InvalidArgument("config: region '" + name + "' needs one bound per axis");
        c.regions.push_back(r);
      }
    }

    const json& load = require(root, "loading", "root");
    check_keys(load, "loading", {"dirichlet", "load_region", "pinned_regions", "steps", "tau_f", "body_force"});
    for (const json& bc : require(load, "dirichlet", "loading")) {
      check_keys(bc, "loading.dirichlet", {"region", "component", "increment"});
      DirichletBc d;
      d.region = require(bc, "region", "loading.dirichlet").get<std::string>();
      d.component = require(bc, "component", "loading.dirichlet").get<int>();
      d.increment = get_or(bc, "increment", 0.0);
      c.dirichlet.push_back(d);
    }
    c.load_region = get_or<std::string>(load, "load_region", "");
    c.pinned_regions = get_or(load, "pinned_regions", std::vector<std::string>{});
    c.n_steps = require(load, "steps", "loading").get<int>();
    c.tau_f = get_or(load, "tau_f", 1e-4);
    if (load.contains("body_force")) {
      const auto b = load.at("body_force").get<std::vector<double>>();
      if (static_cast<int>(b.size()) != c.dimension) throw InvalidArgument("config: body_force needs one entry per axis");
      for (int i = 0; i < c.dimension; ++i) c.body_force[i] = b[i];
    }

    if (root.contains("solver")) {
      const json& s = root.at("solver");
      check_keys(s, "solver",
                 {"newton_abs_tol", "newton_rel_tol", "newton_max_iterations", "stagger_rel_tol", "stagger_abs_tol",
                  "stagger_max_iterations", "stagger_anderson_depth", "linear_solver", "regularized_projection"});
      auto& o = c.solver;
      o.newton_abs_tol = get_or(s, "newton_abs_tol", o.newton_abs_tol);
      o.newton_rel_tol = get_or(s, "newton_rel_tol", o.newton_rel_tol);
      o.newton_max_iterations = get_or(s, "newton_max_iterations", o.newton_max_iterations);
      o.stagger_rel_tol = get_or(s, "stagger_rel_tol", o.stagger_rel_tol);
      o.stagger_abs_tol = get_or(s, "stagger_abs_tol", o.stagger_abs_tol);
      o.stagger_max_iterations = get_or(s, "stagger_max_iterations", o.stagger_max_iterations);
      o.stagger_anderson_depth = get_or(s, "stagger_anderson_depth", o.stagger_anderson_depth);
      if (o.stagger_anderson_depth < 0) throw InvalidArgument("solver.stagger_anderson_depth must be >= 0");
      if (s.contains("linear_solver")) o.linear_solver = parse_linear_solver(s.at("linear_solver").get<std::string>());
      c.regularized_projection = get_or(s, "regularized_projection", false);
    }

    if (root.contains("output")) {
      const json& o = root.at("output");
      check_keys(o, "output", {"directory", "snapshot_every"});
      c.output_directory = get_or<std::string>(o, "directory", c.output_directory);
      c.snapshot_every = get_or(o, "snapshot_every", 0);
    }

    c.material.validate();
    c.optimizer.validate();
    if (c.n_steps < 1) throw InvalidArgument("config: loading.steps must be >= 1");
    if (!(c.tau_f > 0.0)) throw InvalidArgument("config: loading.tau_f must be > 0");
    if (c.snapshot_every < 0) throw InvalidArgument("config: output.snapshot_every must be >= 0");
    return c;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

Problem build_problem(const RunConfig& c) {
  Problem p;
  p.mesh = build_structured_mesh(c.dimension, c.counts, c.extents);
  for (const auto& r : c.regions) {
    std::vector<double> tol(c.dimension);
    for (int a = 0; a < c.dimension; ++a) tol[a] = 1e-9 * c.extents[a];
    bool empty = false;
    p.mesh = tag_region(
        std::move(p.mesh),
        [&](const Point& x) {
          for (int a = 0; a < c.dimension; ++a)
            if (x[a] < r.min[a] - tol[a] || x[a] > r.max[a] + tol[a]) return false;
          return true;
        },
        r.name, &empty);
    if (empty) log_warning("region '" + r.name + "' matches no nodes");
  }
  p.material = c.material;
  p.dirichlet = c.dirichlet;
  p.body_force = c.body_force;
  p.n_steps = c.n_steps;
  p.tau_f = c.tau_f;
  p.load_region = c.load_region;
  p.pinned_regions = c.pinned_regions;
  p.projection.regularized = c.regularized_projection;
  p.projection.l_delta = c.optimizer.topo.l_delta;
  p.solver = c.solver;
  return p;
}

std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<int> snapshot_steps(int cadence, int n_steps) {
  std::vector<int> out;
  if (cadence > 0)
    for (int n = cadence; n <= n_steps; n += cadence) out.push_back(n);
  if (n_steps >= 1 && (out.empty() || out.back() != n_steps)) out.push_back(n_steps);
  return out;
}

namespace {

std::ofstream open_out(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failure on '" + path + "'");
}

}  // namespace

void write_snapshot(const std::string& path, const FeSpace& space, const FieldSet& fields,
                    const std::vector<QuadState>& states) {
  const Mesh& m = space.mesh();
  const int dim = m.dimension;
  const int npe = m.nodes_per_element();
  const int nq = space.num_qp();
  std::ofstream out = open_out(path);
  out << "# vtk DataFile Version 3.0\n"
      << "pftopo snapshot\n"
      << "ASCII\n"
      << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << m.num_nodes() << " double\n";
  for (const auto& x : m.nodes) out << format_number(x[0]) << ' ' << format_number(x[1]) << ' ' << format_number(x[2]) << '\n';
  out << "CELLS " << m.num_elements() << ' ' << m.num_elements() * (npe + 1) << '\n';
  for (const auto& conn : m.elements) {
    out << npe;
    for (int a = 0; a < npe; ++a) out << ' ' << conn[a];
    out << '\n';
  }
  out << "CELL_TYPES " << m.num_elements() << '\n';
  for (int e = 0; e < m.num_elements(); ++e) out << (dim == 2 ? 9 : 12) << '\n';

  out << "POINT_DATA " << m.num_nodes() << '\n';
  out << "VECTORS u double\n";
  for (int i = 0; i < m.num_nodes(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = c < dim ? fields.u[i * dim + c] : 0.0;
      out << (c ? " " : "") << format_number(v);
    }
    out << '\n';
  }
  auto scalar = [&](const char* name, auto value, int count) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (int i = 0; i < count; ++i) out << format_number(value(i)) << '\n';
  };
  scalar("d", [&](int i) { return fields.d[i]; }, m.num_nodes());
  scalar("Phi", [&](int i) { return fields.phi[i]; }, m.num_nodes());
  scalar("H_Phi", [&](int i) { return heaviside_exact(fields.phi[i]); }, m.num_nodes());

  out << "CELL_DATA " << m.num_elements() << '\n';
  auto cell_mean = [&](int e, auto member) {
    double s = 0.0;
    for (int q = 0; q < nq; ++q) s += member(states[e * nq + q]);
    return s / nq;
  };
  scalar("alpha", [&](int e) { return cell_mean(e, [](const QuadState& s) { return s.alpha; }); }, m.num_elements());
  scalar("history", [&](int e) { return cell_mean(e, [](const QuadState& s) { return s.history; }); },
         m.num_elements());
  finish(out, path);
}

void write_load_curve(const std::string& path, const Trajectory& t) {
  std::ofstream out = open_out(path);
  out << "step,prescribed_displacement,total_reaction\n";
  for (int n = 0; n <= t.size(); ++n)
    out << n << ',' << format_number(t.at(n).load_displacement) << ',' << format_number(t.at(n).load_reaction) << '\n';
  finish(out, path);
}

void write_convergence(const std::string& path, const std::vector<ConvergenceRecord>& records) {
  std::ofstream out = open_out(path);
  out << "iteration,objective,volume_ratio,lambda_V\n";
  for (const auto& r : records)
    out << r.iteration << ',' << format_number(r.objective) << ',' << format_number(r.chi) << ','
        << format_number(r.lambda_V) << '\n';
  finish(out, path);
}

void write_curves(const std::string& directory, const Trajectory& t, const std::vector<ConvergenceRecord>& records) {
  write_load_curve((std::filesystem::path(directory) / "load_displacement.csv").string(), t);
  write_convergence((std::filesystem::path(directory) / "convergence.csv").string(), records);
}

void write_fd_report(const std::string& path, const FDReport& r) {
  std::ofstream out = open_out(path);
  out << (r.element_probe ? "element" : "node") << ",analytic,finite_difference,relative_error,valid\n";
  for (const auto& e : r.entries)
    out << e.index << ',' << format_number(e.analytic) << ',' << format_number(e.fd) << ','
        << format_number(e.rel_error) << ',' << (e.valid ? 1 : 0) << '\n';
  finish(out, path);
}

}  // namespace pftopo
