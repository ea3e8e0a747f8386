#include <cmath>
#include <random>

#include "doctest.h"
#include "geoflow/solver.hpp"
#include "helpers.hpp"

using namespace geoflow;
using namespace testutil;

namespace {

GeodesicProblem make_problem(const DomainGrid& g, const TransportPlan& eta, const TransportPlan& gamma) {
  GeodesicProblem p;
  p.grid = g;
  p.eta = eta;
  p.gamma = gamma;
  return p;
}

std::vector<int> reflection_map(const DomainGrid& g) {
  std::vector<int> m(g.num_cells());
  for (int x = 0; x < g.num_cells(); ++x) {
    auto c = g.coords(x);
    for (int j = 0; j < g.d; ++j) c[j] = (g.n - c[j]) % g.n;
    m[x] = g.index(c);
  }
  return m;
}

}  // namespace

TEST_CASE("path enumeration counts") {
  CHECK(count_paths(DomainGrid(1, 2, 1, Geometry::Torus, 1)) == 4);
  CHECK(enumerate_paths(DomainGrid(1, 2, 1, Geometry::Torus, 1)).size() == 4);
  DomainGrid g2(1, 2, 2, Geometry::Torus, 1);
  CHECK(enumerate_paths(g2).size() == static_cast<std::int64_t>(all_sequences(g2).size()));
  CHECK(enumerate_paths(g2).size() == 8);
  CHECK(enumerate_paths(DomainGrid(1, 5, 3, Geometry::Torus, 0)).size() == 5);
  CHECK(enumerate_paths(DomainGrid(2, 3, 2, Geometry::Torus, 0)).size() == 9);
  CHECK_THROWS(enumerate_paths(DomainGrid(2, 8, 8), 1000));
  // label equals start
  auto ps = enumerate_paths(DomainGrid(1, 3, 2, Geometry::Torus, 1));
  for (std::int64_t i = 0; i < ps.size(); ++i) CHECK(ps.path(i).front() == ps.labels[i]);
}

TEST_CASE("translation by one half") {
  DomainGrid g(1, 4, 2);
  auto sol = solve_exact(make_problem(g, identity_plan(4), plan_of_map({2, 3, 0, 1})));
  CHECK(sol.value == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(sol.pressure.p.cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(action_of_measure(sol.flow) == doctest::Approx(sol.value));
  CHECK(incompressibility_residual(sol.flow) < 1e-12);
}

TEST_CASE("identity endpoints short circuit") {
  DomainGrid g(1, 4, 2);
  auto sol = solve_exact(make_problem(g, identity_plan(4), identity_plan(4)));
  CHECK(sol.value == 0.0);
  CHECK(sol.diag.short_circuit);
  for (const auto& p : sol.flow.paths) CHECK(p.nodes == std::vector<int>(3, p.label));
}

TEST_CASE("reflection matches the brute force lp") {
  DomainGrid g(1, 4, 2);
  auto prob = make_problem(g, identity_plan(4), plan_of_map(reflection_map(g)));
  auto sol = solve_exact(prob);
  auto oracle = brute_force_geodesic(g, prob.eta, prob.gamma);
  REQUIRE(oracle.feasible);
  CHECK(sol.value == doctest::Approx(oracle.value).epsilon(1e-10));
  CHECK(std::abs(sol.diag.gap) < 1e-8);
  CHECK(sol.diag.dual_infeasibility < 1e-8);
  CHECK(sol.diag.complementary_slackness < 1e-8);
  for (int r = 0; r < sol.pressure.p.rows(); ++r) CHECK(std::abs(sol.pressure.p.row(r).sum()) < 1e-10);
}

TEST_CASE("random plans match the brute force lp") {
  std::mt19937_64 rng(2024);
  for (auto g : {DomainGrid(1, 4, 2, Geometry::Torus, 1), DomainGrid(2, 2, 2), DomainGrid(1, 3, 3, Geometry::Cube, 1)}) {
    for (int t = 0; t < 4; ++t) {
      auto prob = make_problem(g, random_plan(g.num_cells(), rng, 2), random_plan(g.num_cells(), rng, 3));
      auto oracle = brute_force_geodesic(g, prob.eta, prob.gamma);
      if (!oracle.feasible) {
        CHECK_THROWS(solve_exact(prob));
        continue;
      }
      auto sol = solve_exact(prob);
      CHECK(sol.value == doctest::Approx(oracle.value).epsilon(1e-9));
      CHECK(std::abs(sol.value - sol.diag.dual_value) < 1e-8);
      sol.flow.validate(1e-10);
      CHECK(incompressibility_residual(sol.flow) < 1e-9);
      CHECK((label_plan(sol.flow, 0).m - prob.eta.m).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((label_plan(sol.flow, g.K).m - prob.gamma.m).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("infeasible endpoints are reported") {
  // n=8 with cap 1 and K=1 cannot reach the antipode
  DomainGrid g(1, 8, 1, Geometry::Torus, 1);
  std::vector<int> m(8);
  for (int x = 0; x < 8; ++x) m[x] = (x + 4) % 8;
  CHECK_THROWS_WITH_AS(solve_exact(make_problem(g, identity_plan(8), plan_of_map(m))), doctest::Contains("infeasible"),
                       std::runtime_error);
}

TEST_CASE("speed is constant on a rigid translation") {
  DomainGrid g(1, 8, 4);
  std::vector<int> m(8);
  for (int x = 0; x < 8; ++x) m[x] = (x + 4) % 8;
  auto sol = solve_exact(make_problem(g, identity_plan(8), plan_of_map(m)));
  auto sp = speed_profile(sol.flow);
  double lo = *std::min_element(sp.begin(), sp.end()), hi = *std::max_element(sp.begin(), sp.end());
  CHECK((hi - lo) / hi <= 1e-6);
}

TEST_CASE("restriction of an optimum stays optimal") {
  DomainGrid g(1, 4, 4);
  auto prob = make_problem(g, identity_plan(4), plan_of_map(reflection_map(g)));
  auto sol = solve_exact(prob);
  for (auto [s, t] : {std::pair{0, 2}, std::pair{1, 3}, std::pair{1, 4}}) {
    auto r = restrict(sol.flow, s, t);
    auto sub = make_problem(r.grid, label_plan(sol.flow, s), label_plan(sol.flow, t));
    auto ss = solve_exact(sub);
    CHECK(ss.value == doctest::Approx(action_of_measure(r)).epsilon(1e-8));
  }
}

TEST_CASE("symmetry and right invariance") {
  std::mt19937_64 rng(8);
  DomainGrid g(1, 4, 2);
  for (int t = 0; t < 3; ++t) {
    auto a = random_plan(4, rng, 2), b = random_plan(4, rng, 2);
    double v1 = solve_exact(make_problem(g, a, b)).value;
    double v2 = solve_exact(make_problem(g, b, a)).value;
    CHECK(v1 == doctest::Approx(v2).epsilon(1e-10));
    // relabel both plans by the same permutation
    auto s = random_perm(4, rng);
    Eigen::MatrixXd pa(4, 4), pb(4, 4);
    for (int i = 0; i < 4; ++i) {
      pa.row(i) = a.m.row(s[i]);
      pb.row(i) = b.m.row(s[i]);
    }
    double v3 = solve_exact(make_problem(g, TransportPlan(pa), TransportPlan(pb))).value;
    CHECK(v3 == doctest::Approx(v1).epsilon(1e-12));
  }
}

TEST_CASE("dual gap") {
  DomainGrid g(1, 4, 2);
  auto prob = make_problem(g, identity_plan(4), plan_of_map(reflection_map(g)));
  auto sol = solve_exact(prob);
  CHECK(std::abs(dual_gap(sol.flow, sol.pressure, sol.flow)) < 1e-10);
  // competitor: label 1 moves through the other side, rebalanced on label 3
  PathMeasure nu = sol.flow;
  for (auto& p : nu.paths) {
    if (p.label == 1) p.nodes = {1, 2, 3};
    if (p.label == 3) p.nodes = {3, 0, 1};
  }
  nu = canonicalize(nu);
  CHECK(dual_gap(sol.flow, sol.pressure, nu) >= -1e-10);
  // compressible competitor: everyone stays put at the midpoint slice
  PathMeasure mu = sol.flow;
  for (auto& p : mu.paths) p.nodes[1] = p.nodes[0];
  mu = canonicalize(mu);
  CHECK(dual_gap(sol.flow, sol.pressure, mu) >= -1e-10);
}

TEST_CASE("entropic backend") {
  DomainGrid g(1, 4, 2);
  auto id = make_problem(g, identity_plan(4), identity_plan(4));
  id.backend = Backend::Entropic;
  id.epsilon = 1e-3;
  CHECK(solve(id).value < 1e-6);

  auto tr = make_problem(g, identity_plan(4), plan_of_map({2, 3, 0, 1}));
  tr.backend = Backend::Entropic;
  tr.epsilon = 1e-3;
  auto st = solve(tr);
  CHECK(std::abs(st.value - 0.125) <= 0.02 * 0.125);
  CHECK(st.diag.marginal_error <= 1e-8);

  auto rf = make_problem(g, identity_plan(4), plan_of_map(reflection_map(g)));
  double exact = solve_exact(rf).value;
  rf.backend = Backend::Entropic;
  double prev = 1e300;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    rf.epsilon = eps;
    auto s = solve(rf);
    CHECK(s.value <= prev + 1e-12);
    CHECK(s.value >= exact - 1e-9);
    prev = s.value;
  }
  CHECK(prev <= exact * 1.02);
}

TEST_CASE("problem validation") {
  DomainGrid g(1, 4, 2);
  Eigen::MatrixXd bad = identity_plan(4).m;
  bad(0, 0) = 0.2;
  bad(0, 1) = 0.05;
  CHECK_THROWS_AS(solve_exact(make_problem(g, identity_plan(4), TransportPlan(bad))), std::invalid_argument);
}

TEST_CASE("metric axioms on random triples") {
  std::mt19937_64 rng(11);
  for (const DomainGrid& g : {DomainGrid(1, 4, 4), DomainGrid(2, 2, 2)}) {
    auto dist = [&](const TransportPlan& x, const TransportPlan& y) { return std::sqrt(solve_exact(make_problem(g, x, y)).value); };
    for (int t = 0; t < 8; ++t) {
      int N = g.num_cells();
      auto a = random_plan(N, rng, 1 + t % 3), b = random_plan(N, rng, 2), c = random_plan(N, rng, 1 + t % 2);
      double ab = dist(a, b), bc = dist(b, c), ac = dist(a, c);
      CHECK(ac <= ab + bc + 1e-9);
      CHECK(dist(c, a) == doctest::Approx(ac).epsilon(1e-12));
      CHECK(dist(a, a) <= 1e-12);
    }
  }
}
