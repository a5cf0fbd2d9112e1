#include <cmath>
#include <limits>

#include "doctest.h"
#include "fixtures.hpp"
#include "pftopo/errors.hpp"
#include "pftopo/io.hpp"
#include "pftopo/optimizer.hpp"
#include "pftopo/sensitivity.hpp"

using namespace pftopo;

namespace {

struct Toy {
  Mesh mesh = build_structured_mesh(2, {2, 1}, {2.0, 1.0});
  FeSpace space{mesh};
  OptimizerSettings settings;
  Eigen::VectorXd G_S, density;

  Toy() {
    settings.topo.tau_phi = 0.1;
    settings.topo.l_phi = 1e-3;
    const int n = mesh.num_nodes();
    G_S.resize(n);
    for (int i = 0; i < n; ++i) G_S[i] = mesh.nodes[i][0] - 1.0;
    density = dirac_nodal_integral(space, Eigen::VectorXd::Constant(n, 0.05), settings.topo.l_delta)
                  .cwiseQuotient(space.lumped_measure());
  }
  OptimizerState state(double expected) const {
    OptimizerState st;
    st.phi = Eigen::VectorXd::Constant(mesh.num_nodes(), 0.05);
    st.expected_volume = expected;
    return st;
  }
};

}  // namespace

TEST_CASE("expected volume schedule") {
  CHECK(expected_volume(1.0, 0.4, 0.05) == doctest::Approx(0.97).epsilon(1e-15));
  CHECK(expected_volume(0.4, 0.4, 0.05) == 0.4);
  double v = 1.0;
  for (int m = 0; m < 400; ++m) {
    const double next = expected_volume(v, 0.4, 0.05);
    CHECK(next < v);
    CHECK(next > 0.4);
    CHECK(next - 0.4 == doctest::Approx(0.95 * (v - 0.4)).epsilon(1e-12));
    v = next;
  }
  CHECK(v - 0.4 < 1e-8);
}

TEST_CASE("settings validation") {
  OptimizerSettings s;
  CHECK_NOTHROW(s.validate());
  s.formulation = 3;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = OptimizerSettings{};
  s.target_volume = 0.0;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = OptimizerSettings{};
  s.lambda_lower = 10.0;
  s.lambda_upper = 1.0;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
}

TEST_CASE("first bisection multiplier is the geometric mean of the bracket") {
  Toy toy;
  OptimizerState st = toy.state(0.5);
  const ReactionDiffusion rd(toy.space, toy.settings.topo, {});
  const BisectionResult r = bisection_step(st, toy.G_S, toy.density, rd, toy.space, toy.settings);
  REQUIRE_FALSE(r.lambda_trace.empty());
  CHECK(r.lambda_trace.front() == 1.0);
}

TEST_CASE("zero sensitivity keeps a solid design and raises the lower bound") {
  const ForwardSolver s(build_problem(load_config(fixtures::scenario("cantilever_elastic"))));
  OptimizerSettings settings;
  const int n = s.mesh().num_nodes();
  const ReactionDiffusion rd(s.space(), settings.topo, s.pinned_phi_nodes());
  OptimizerState st;
  st.phi = Eigen::VectorXd::Ones(n);
  st.expected_volume = expected_volume(1.0, 0.4, 0.05);
  const Eigen::VectorXd density =
      dirac_nodal_integral(s.space(), st.phi, settings.topo.l_delta).cwiseQuotient(s.space().lumped_measure());
  const BisectionResult r = bisection_step(st, Eigen::VectorXd::Zero(n), density, rd, s.space(), settings);
  CHECK(r.chi == 1.0);
  for (std::size_t k = 1; k < r.lambda_trace.size(); ++k) CHECK(r.lambda_trace[k] > r.lambda_trace[k - 1]);
  CHECK(r.bracket_ok);
}

TEST_CASE("bisection brackets the volume transition found by a scan") {
  Toy toy;
  const double target = 0.5;
  const ReactionDiffusion rd(toy.space, toy.settings.topo, {});
  auto chi_at = [&](double lambda) {
    const Eigen::VectorXd v = velocity_from_sensitivity(toy.G_S + lambda * toy.density);
    return volume_ratio(toy.space, rd.solve(toy.state(target).phi, v));
  };
  // Scan oracle: chi(lambda) is nonincreasing, so find the last grid point
  // that still meets the target.
  double last_ok = 0.0, first_bad = std::numeric_limits<double>::infinity();
  double prev_chi = 2.0;
  for (double e = -8.0; e <= 8.0; e += 0.01) {
    const double lambda = std::pow(10.0, e);
    const double chi = chi_at(lambda);
    REQUIRE(chi <= prev_chi);
    prev_chi = chi;
    if (chi >= target)
      last_ok = lambda;
    else if (!std::isfinite(first_bad))
      first_bad = lambda;
  }
  REQUIRE(last_ok > 0.0);
  REQUIRE(std::isfinite(first_bad));

  OptimizerState st = toy.state(target);
  const BisectionResult r = bisection_step(st, toy.G_S, toy.density, rd, toy.space, toy.settings);
  CHECK(r.converged);
  CHECK(r.bracket_ok);
  CHECK(r.iterations <= toy.settings.bisection_max_iterations);
  CHECK(r.lambda_l <= r.lambda_u);
  CHECK(r.lambda_l <= first_bad * (1 + 1e-12));
  CHECK(r.lambda_u >= last_ok * (1 - 1e-12));
  CHECK(std::abs(std::log10(r.lambda_V) - std::log10(std::sqrt(last_ok * first_bad))) <= 0.02);
}

TEST_CASE("fracture onset and solid damage") {
  Trajectory t;
  t.initial.fields.d = Eigen::VectorXd::Zero(3);
  t.initial.fields.phi = Eigen::VectorXd::Ones(3);
  for (int n = 1; n <= 4; ++n) {
    StepRecord r;
    r.fields.d = Eigen::VectorXd::Constant(3, 0.05 * n);
    r.fields.d[2] = 0.9;  // a void node is ignored
    r.fields.phi = Eigen::VectorXd::Ones(3);
    r.fields.phi[2] = -1.0;
    r.load_displacement = -0.01 * n;
    t.steps.push_back(r);
  }
  CHECK(max_solid_damage(t.at(2)) == doctest::Approx(0.1));
  CHECK(fracture_onset(t, 0.1) == doctest::Approx(0.03));
  CHECK(std::isinf(fracture_onset(t, 0.5)));
}

TEST_CASE("full target volume stops after one iteration") {
  const RunConfig cfg = load_config(fixtures::scenario("full_volume"));
  const ForwardSolver s(build_problem(cfg));
  const Eigen::VectorXd phi0 = Eigen::VectorXd::Ones(s.mesh().num_nodes());
  const OptimizationResult r = run_optimization(s, cfg.optimizer, phi0);
  CHECK(r.converged);
  CHECK(r.records.size() == 1);
  CHECK(r.phi == phi0);
}

TEST_CASE("elastic cantilever reaches half volume") {
  const RunConfig cfg = load_config(fixtures::scenario("cantilever_elastic"));
  const ForwardSolver s(build_problem(cfg));
  const Eigen::VectorXd phi0 = Eigen::VectorXd::Ones(s.mesh().num_nodes());
  const OptimizationResult r = run_optimization(s, cfg.optimizer, phi0);
  REQUIRE_FALSE(r.aborted);
  CHECK(r.converged);
  CHECK(std::abs(volume_ratio(s.space(), r.phi) - 0.5) <= 0.01);
  for (int p : s.pinned_phi_nodes()) CHECK(r.phi[p] == 1.0);

  for (std::size_t k = 0; k < r.records.size(); ++k) {
    const ConvergenceRecord& c = r.records[k];
    CHECK(std::isfinite(c.objective));
    CHECK(c.chi >= 0.0);
    CHECK(c.chi <= 1.0);
    if (k + 1 < r.records.size()) {
      CHECK(r.records[k + 1].chi == c.chi_next);
      // While the design is still fully solid no multiplier in the bracket can
      // push the level set below zero; the bisection then saturates.
      if (c.chi_next < 1.0 && c.bisection_converged)
        CHECK(std::abs(c.chi_next - c.expected_volume) <= cfg.optimizer.volume_tol);
      if (c.chi_next >= 1.0) CHECK(c.chi == 1.0);
    }
  }
  const std::size_t n = r.records.size();
  REQUIRE(n >= 4);
  CHECK(std::abs(r.records[n - 1].chi - cfg.optimizer.target_volume) <= cfg.optimizer.volume_tol);
  for (std::size_t k = n - 3; k < n; ++k) {
    const double prev = r.records[k - 1].objective;
    CHECK(std::abs(r.records[k].objective - prev) / std::abs(prev) < cfg.optimizer.stagnation_tol);
  }
}
