#include <cmath>
#include <random>

#include "doctest.h"
#include "geoflow/eulerian.hpp"
#include "geoflow/solver.hpp"
#include "helpers.hpp"

using namespace geoflow;
using namespace testutil;

TEST_CASE("translation flow") {
  DomainGrid g(1, 4, 2);
  auto ef = from_path_measure(translation_flow(g, 1));
  ef.validate();
  CHECK(eulerian_action(ef) == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(edge_cost_action(ef) == doctest::Approx(0.125).epsilon(1e-14));
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 2; ++k) CHECK(ef.edges[i][k].size() == 1);
  auto p = pressure_from_eulerian(ef);
  CHECK(p.p.cwiseAbs().maxCoeff() < 1e-12);
  auto back = to_path_measure(ef);
  CHECK(back.paths.size() == 4);
}

TEST_CASE("static flow has zero action") {
  DomainGrid g(2, 3, 3);
  auto ef = from_path_measure(constant_flow(g));
  CHECK(eulerian_action(ef) == 0.0);
}

TEST_CASE("opposite steps cancel in the averaged velocity") {
  DomainGrid g(1, 4, 1);
  PathMeasure eta;
  eta.grid = g;
  for (int a = 0; a < 4; ++a) {
    eta.paths.push_back({a, {a, (a + 1) % 4}, 0.125});
    eta.paths.push_back({a, {a, (a + 3) % 4}, 0.125});
  }
  eta.validate();
  auto ef = from_path_measure(eta);
  CHECK(std::abs(ef.velocity(0, 0, 0)[0]) < 1e-15);
  CHECK(eulerian_action(ef) == 0.0);
  CHECK(action_of_measure(eta) == doctest::Approx(1.0 / 32));
  CHECK(eulerian_action(ef) < action_of_measure(eta));
}

TEST_CASE("random flows keep continuity") {
  std::mt19937_64 rng(21);
  for (auto g : {DomainGrid(1, 4, 3), DomainGrid(2, 3, 2, Geometry::Cube, 1)}) {
    auto eta = random_measure(g, rng, 3);
    auto ef = from_path_measure(eta);
    CHECK(continuity_residual(ef) < 1e-14);
    // histograms per label
    for (size_t i = 0; i < ef.labels.size(); ++i)
      for (int k = 0; k <= g.K; ++k)
        for (int x = 0; x < g.num_cells(); ++x) {
          double s = 0.0;
          for (const auto& p : eta.paths)
            if (p.label == ef.labels[i] && p.nodes[k] == x) s += p.weight;
          CHECK(ef.c[i](k, x) == doctest::Approx(s * g.num_cells()).epsilon(1e-13));
        }
    CHECK(eulerian_action(ef) <= action_of_measure(eta) + 1e-14);
    auto back = to_path_measure(ef);
    auto ef2 = from_path_measure(back);
    CHECK(edge_cost_action(ef2) == doctest::Approx(edge_cost_action(ef)).epsilon(1e-12));
    CHECK(std::abs(action_of_measure(back) - action_of_measure(eta)) < 1e-12);
    for (size_t i = 0; i < ef.labels.size(); ++i) CHECK((ef2.c[i] - ef.c[i]).cwiseAbs().maxCoeff() < 1e-12);
    // incompressibility residual agrees with the path side
    CHECK(incompressibility_residual(ef) == doctest::Approx(incompressibility_residual(eta)).epsilon(1e-12));
  }
}

TEST_CASE("uniform mixing on two cells") {
  DomainGrid g(1, 2, 1, Geometry::Torus, 1);
  EulerianFlow ef;
  ef.grid = g;
  ef.labels = {0, 1};
  for (int a = 0; a < 2; ++a) {
    Eigen::MatrixXd c(2, 2);
    c << (a == 0 ? 1.0 : 0.0), (a == 0 ? 0.0 : 1.0), 0.5, 0.5;
    ef.c.push_back(c);
    ef.edges.push_back({{{{a, 0}, 0.5}, {{a, 1}, 0.5}}});
  }
  ef.validate();
  auto eta = to_path_measure(ef);
  REQUIRE(eta.paths.size() == 4);
  for (const auto& p : eta.paths) CHECK(p.weight == doctest::Approx(0.25));
  CHECK(eta.paths[0].nodes == std::vector<int>{0, 0});
  CHECK(eta.paths[1].nodes == std::vector<int>{0, 1});
}

TEST_CASE("broken continuity cannot be decomposed") {
  DomainGrid g(1, 4, 2);
  auto ef = from_path_measure(translation_flow(g, 1));
  ef.edges[0][1].begin()->second = 0.5;
  CHECK(continuity_residual(ef) > 0.1);
  CHECK_THROWS_AS(to_path_measure(ef), std::invalid_argument);
}

TEST_CASE("lp optimum round trip and equality case") {
  DomainGrid g(1, 4, 4);
  GeodesicProblem prob;
  prob.grid = g;
  prob.eta = identity_plan(4);
  prob.gamma = plan_of_map({0, 3, 2, 1});
  auto sol = solve_exact(prob);
  auto ef = from_path_measure(sol.flow);
  CHECK(edge_cost_action(ef) == doctest::Approx(sol.value).epsilon(1e-10));
  double ea = eulerian_action(ef);
  CHECK(ea <= sol.value + 1e-12);
  // equality iff every (k, x, label) has a single outgoing step
  bool det = true;
  for (size_t i = 0; i < ef.labels.size(); ++i)
    for (int k = 0; k < g.K; ++k)
      for (int x = 0; x < 4; ++x) {
        int outs = 0;
        for (const auto& [e, m] : ef.edges[i][k]) outs += e.first == x;
        det = det && outs <= 1;
      }
  if (det)
    CHECK(std::abs(ea - sol.value) < 1e-12);
  else
    CHECK(ea < sol.value - 1e-12);
  auto back = to_path_measure(ef);
  CHECK(action_of_measure(back) == doctest::Approx(sol.value).epsilon(1e-10));
}

TEST_CASE("static flow has zero pressure") {
  DomainGrid g(2, 4, 3);
  auto ef = from_path_measure(constant_flow(g));
  auto p = pressure_from_eulerian(ef);
  CHECK(p.p.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(pressure_gradient_residual(ef, p) < 1e-12);
}

TEST_CASE("pressure decreases along the acceleration") {
  // left half accelerates forward at k=1, right half backward
  DomainGrid g(1, 8, 2, Geometry::Torus, 2);
  PathMeasure eta;
  eta.grid = g;
  for (int a = 0; a < 8; ++a) eta.paths.push_back({a, {a, a, (a + (a < 4 ? 1 : 7)) % 8}, 0.125});
  auto ef = from_path_measure(eta);
  auto p = pressure_from_eulerian(ef);
  CHECK(std::abs(p.p.row(0).sum()) < 1e-12);
  auto acc = eulerian_acceleration(ef, 0);
  CHECK(acc(0, 1) > 0);
  CHECK(acc(0, 5) < 0);
  CHECK(p.at(1, 0) > p.at(1, 4));
  for (int x = 1; x < 4; ++x) CHECK(p.at(1, x) < p.at(1, x - 1) + 1e-12);
}
