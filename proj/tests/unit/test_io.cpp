#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "pftopo/errors.hpp"
#include "pftopo/io.hpp"
#include "pftopo/levelset.hpp"

using namespace pftopo;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

std::vector<double> split_csv(const std::string& line) {
  std::vector<double> v;
  std::stringstream s(line);
  for (std::string tok; std::getline(s, tok, ',');) v.push_back(std::stod(tok));
  return v;
}

// Values following "SCALARS <name>" and its lookup-table line.
std::vector<double> vtk_scalars(const std::string& path, const std::string& name, int count) {
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].rfind("SCALARS " + name + " ", 0) != 0) continue;
    std::vector<double> v;
    for (int k = 0; k < count; ++k) v.push_back(std::stod(lines[i + 2 + k]));
    return v;
  }
  return {};
}

std::string example3(const std::string& fracture_extra = R"("psi_c": 13.0)",
                     const std::string& material_extra = "") {
  return R"({
    "mesh": {"dimension": 2, "counts": [4, 2], "extents": [2.0, 1.0]},
    "material": {"K": 175.0, "mu": 80.76, "h": 200.0, "sigma_Y": 543.0)" + material_extra + R"(},
    "fracture": {)" + fracture_extra + R"(, "l_f": 0.1, "zeta": 10.0},
    "regions": {"left": {"min": [0.0, 0.0], "max": [0.0, 1.0]},
                "right": {"min": [2.0, 0.0], "max": [2.0, 1.0]}},
    "loading": {
      "dirichlet": [{"region": "left", "component": 0}, {"region": "left", "component": 1},
                    {"region": "right", "component": 0, "increment": 0.001}],
      "load_region": "right",
      "steps": 3
    }
  })";
}

}  // namespace

TEST_CASE("ductile example configuration is accepted with defaults") {
  const RunConfig c = parse_config(example3());
  CHECK(c.material.bulk == 175.0);
  CHECK(c.material.shear == 80.76);
  CHECK(c.material.hardening == 200.0);
  CHECK(c.material.yield_stress == 543.0);
  CHECK(c.material.psi_c == 13.0);
  CHECK(c.material.zeta == 10.0);
  CHECK(c.material.kappa == 1e-8);
  CHECK(c.n_steps == 3);
  CHECK_NOTHROW(build_problem(c));
}

TEST_CASE("configuration errors are rejected") {
  CHECK_THROWS_AS(parse_config(example3(R"("sigma_c": 2.0, "G_c": 1.0)")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(example3(R"("psi_c": 13.0, "G_c": 1.0)")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(example3(R"("l_f_typo": 1.0)")), InvalidArgument);
  CHECK_THROWS_AS(parse_config(example3(R"("psi_c": 13.0)", R"(, "colour": 1)")), InvalidArgument);
  CHECK_THROWS_AS(parse_config("{ not json"), InvalidArgument);
  CHECK_THROWS(load_config(fixtures::scratch("does_not_exist.json")));
  std::string bad = example3();
  bad.replace(bad.find("\"steps\": 3"), 10, "\"steps\": 0");
  CHECK_THROWS_AS(parse_config(bad), InvalidArgument);
}

TEST_CASE("single element snapshot matches the golden file byte for byte") {
  const Mesh mesh = build_structured_mesh(2, {1, 1}, {1.0, 1.0});
  const FeSpace space(mesh);
  FieldSet f;
  f.u = Eigen::VectorXd::Zero(8);
  f.d = Eigen::VectorXd::Zero(4);
  f.phi = Eigen::VectorXd::Zero(4);
  const std::vector<QuadState> states(space.num_qp());
  const std::string path = fixtures::scratch("io/one_element.vtk");
  write_snapshot(path, space, f, states);
  CHECK(read_file(path) == read_file(std::string(PFTOPO_SOURCE_DIR) + "/tests/golden/one_element.vtk"));
}

TEST_CASE("snapshot values round-trip to nine significant digits") {
  const Mesh mesh = build_structured_mesh(2, {3, 2}, {3.0, 2.0});
  const FeSpace space(mesh);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FieldSet f;
  f.u = Eigen::VectorXd::Zero(2 * mesh.num_nodes());
  f.d.resize(mesh.num_nodes());
  f.phi.resize(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    f.d[i] = u(rng) * std::pow(10.0, -6.0 * u(rng));
    f.phi[i] = 2.0 * u(rng) - 1.0;
  }
  std::vector<QuadState> states(mesh.num_elements() * space.num_qp());
  const std::string path = fixtures::scratch("io/roundtrip.vtk");
  write_snapshot(path, space, f, states);
  const auto d = vtk_scalars(path, "d", mesh.num_nodes());
  const auto h = vtk_scalars(path, "H_Phi", mesh.num_nodes());
  REQUIRE(d.size() == std::size_t(mesh.num_nodes()));
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    CHECK(std::abs(d[i] - f.d[i]) <= 5e-9 * std::abs(f.d[i]));
    CHECK(h[i] == heaviside_exact(f.phi[i]));
  }
  CHECK(format_number(0.1234567891234) == "0.123456789");
  CHECK(format_number(-2.5e-12) == "-2.5e-12");
  const std::string again = read_file(path);
  write_snapshot(path, space, f, states);
  CHECK(read_file(path) == again);
}

TEST_CASE("snapshot cadence includes the final step") {
  CHECK(snapshot_steps(10, 35) == std::vector<int>{10, 20, 30, 35});
  CHECK(snapshot_steps(10, 30) == std::vector<int>{10, 20, 30});
  CHECK(snapshot_steps(0, 7) == std::vector<int>{7});
}

TEST_CASE("curve files have fixed headers") {
  const std::string dir = fixtures::scratch("io/empty_curves");
  Trajectory t;
  write_curves(dir, t, {});
  CHECK(read_file(dir + "/convergence.csv") == "iteration,objective,volume_ratio,lambda_V\n");
  CHECK(read_file(dir + "/load_displacement.csv") ==
        "step,prescribed_displacement,total_reaction\n0,0,0\n");
  FDReport r;
  write_fd_report(dir + "/fd.csv", r);
  CHECK(read_file(dir + "/fd.csv") == "node,analytic,finite_difference,relative_error,valid\n");
}

TEST_CASE("elastic load curve is linear") {
  RunConfig cfg = load_config(fixtures::scenario("cantilever_elastic"));
  cfg.n_steps = 6;
  const ForwardSolver s(build_problem(cfg));
  const Trajectory t = s.run_load_history(Eigen::VectorXd::Ones(s.mesh().num_nodes()));
  const std::string path = fixtures::scratch("io/elastic_curve.csv");
  write_load_curve(path, t);
  const auto lines = read_lines(path);
  REQUIRE(lines.size() == 8);
  std::vector<double> x, y;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto v = split_csv(lines[k]);
    REQUIRE(v.size() == 3);
    CHECK(v[0] == double(k - 1));
    x.push_back(v[1]);
    y.push_back(v[2]);
  }
  const int n = static_cast<int>(x.size());
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) mx += x[i] / n, my += y[i] / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double r2 = sxy * sxy / (sxx * syy);
  CHECK(1.0 - r2 <= 1e-10);
}

TEST_CASE("missing configuration exits with an argument error") {
  const std::string missing = fixtures::scratch("no_such_config.json");
  const char* argv[] = {"pftopo", "run", missing.c_str()};
  CHECK(cli_run(3, argv) == 2);
  const char* bad[] = {"pftopo", "explode"};
  CHECK(cli_run(2, bad) == 2);
  const char* none[] = {"pftopo"};
  CHECK(cli_run(1, none) == 2);
}

TEST_CASE("exported volume ratio matches the exported design") {
  const std::string out = fixtures::scratch("io/cantilever_run");
  fs::remove_all(out);
  const std::string cfg = fixtures::scenario("cantilever_elastic");
  const char* argv[] = {"pftopo", "run", cfg.c_str(), "-o", out.c_str(), "-q"};
  REQUIRE(cli_run(6, argv) == 0);
  const auto conv = read_lines(out + "/convergence.csv");
  REQUIRE(conv.size() >= 2);
  const double chi_exported = split_csv(conv.back())[2];

  const RunConfig c = load_config(cfg);
  const Mesh mesh = build_problem(c).mesh;
  const FeSpace space(mesh);
  const auto phi = vtk_scalars(out + "/design.vtk", "Phi", mesh.num_nodes());
  REQUIRE(phi.size() == std::size_t(mesh.num_nodes()));
  const double chi = volume_ratio(space, Eigen::Map<const Eigen::VectorXd>(phi.data(), phi.size()));
  CHECK(format_number(chi) == format_number(chi_exported));
  for (std::size_t k = 1; k < conv.size(); ++k) {
    const double v = split_csv(conv[k])[2];
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}
