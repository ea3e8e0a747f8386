#include <filesystem>
#include <random>

#include "doctest.h"
#include "geoflow/eulerian.hpp"
#include "geoflow/io.hpp"
#include "helpers.hpp"

using namespace geoflow;
using namespace testutil;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("geoflow_io_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("grid round trip and rejection") {
  DomainGrid g(2, 4, 3, Geometry::Cube, 1);
  CHECK(grid_from_json(grid_to_json(g)) == g);
  json j = grid_to_json(g);
  j["extra"] = 1;
  CHECK_THROWS_AS(grid_from_json(j), InputError);
  CHECK_THROWS_AS(grid_from_json(json{{"d", 3}, {"n", 4}, {"K", 2}}), InputError);
  CHECK_THROWS_AS(grid_from_json(json{{"d", 1}, {"n", 4}}), InputError);
  CHECK_THROWS_AS(grid_from_json(json{{"d", 1}, {"n", "4"}, {"K", 2}}), InputError);
  // cap defaults
  CHECK(grid_from_json(json{{"d", 1}, {"n", 4}, {"K", 2}}).cap == DomainGrid().cap);
}

TEST_CASE("flow round trip is exact") {
  std::mt19937_64 rng(5);
  DomainGrid g(1, 4, 3);
  auto eta = random_measure(g, rng, 3);
  auto back = flow_from_json(json::parse(flow_to_json(eta).dump()));
  REQUIRE(back.paths.size() == eta.paths.size());
  for (size_t i = 0; i < eta.paths.size(); ++i) {
    CHECK(back.paths[i].label == eta.paths[i].label);
    CHECK(back.paths[i].nodes == eta.paths[i].nodes);
    CHECK(back.paths[i].weight == eta.paths[i].weight);
  }
  json bad = flow_to_json(eta);
  bad["paths"][0]["nodes"] = json::array({0, 1});
  CHECK_THROWS_AS(flow_from_json(bad), InputError);
}

TEST_CASE("plan parsing reports the offending row") {
  DomainGrid g(1, 4, 2);
  json j = plan_to_json(g, identity_plan(4));
  DomainGrid pg;
  auto p = plan_from_json(j, &pg);
  CHECK(pg == g);
  CHECK(p.m == identity_plan(4).m);

  j["matrix"][2] = json::array({0.0, 0.0, 0.2, 0.05});
  j["matrix"][3] = json::array({0.0, 0.0, 0.05, 0.15});
  try {
    plan_from_json(j);
    FAIL("accepted a bad plan");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  // rows fine, column off
  json c = plan_to_json(g, identity_plan(4));
  c["matrix"][0] = json::array({0.125, 0.125, 0.0, 0.0});
  c["matrix"][1] = json::array({0.125, 0.125, 0.0, 0.0});
  c["matrix"][2] = json::array({0.0, 0.0, 0.25, 0.0});
  c["matrix"][3] = json::array({0.0, 0.0, 0.25, 0.0});
  try {
    plan_from_json(c);
    FAIL("accepted a bad plan");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("column 2") != std::string::npos);
  }
}

TEST_CASE("pressure csv round trip") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (int d : {1, 2}) {
    DomainGrid g(d, 3, 4);
    PressureField p(g.K, g.num_cells());
    for (int i = 0; i < p.p.size(); ++i) p.p.data()[i] = nd(rng);
    auto text = pressure_to_csv(g, p);
    auto q = pressure_from_csv(g, text);
    CHECK(q.p == p.p);
    CHECK(pressure_to_csv(g, q) == text);
  }
  DomainGrid g(1, 4, 3);
  CHECK_THROWS_AS(pressure_from_csv(g, "k,i0,i1,value\n"), InputError);
  CHECK_THROWS_AS(pressure_from_csv(g, "k,i0,value\n1,0,0\n"), InputError);  // incomplete
  CHECK_THROWS_AS(pressure_from_csv(g, "k,i0,value\n0,0,1\n"), InputError);  // endpoint node
  CHECK_THROWS_AS(pressure_from_csv(g, "k,i0,value\n1,x,1\n"), InputError);
  // K = 1 has no interior node
  CHECK(pressure_from_csv(DomainGrid(1, 4, 1), "k,i0,value\n").p.size() == 0);
}

TEST_CASE("euler round trip") {
  std::mt19937_64 rng(9);
  DomainGrid g(2, 2, 2, Geometry::Torus, 1);
  auto ef = from_path_measure(random_measure(g, rng, 2));
  auto back = euler_from_json(json::parse(euler_to_json(ef).dump()));
  CHECK(back.labels == ef.labels);
  for (size_t i = 0; i < ef.labels.size(); ++i) {
    CHECK(back.c[i] == ef.c[i]);
    CHECK(back.edges[i] == ef.edges[i]);
  }
  CHECK(edge_cost_action(back) == edge_cost_action(ef));
}

TEST_CASE("maps round trip") {
  MPMapFlow f;
  f.d = 2;
  f.n = 2;
  f.refine = 2;
  f.times = {0.0, 0.5, 1.0};
  std::vector<int> id(16);
  for (int i = 0; i < 16; ++i) id[i] = i;
  f.maps = {id, id, id};
  std::swap(f.maps[2][0], f.maps[2][5]);
  auto b = maps_from_json(maps_to_json(f));
  CHECK(b.maps == f.maps);
  CHECK(b.times == f.times);
  CHECK(b.all_bijections());
  json j = maps_to_json(f);
  j["times"] = json::array({0.0, 1.0});
  CHECK_THROWS_AS(maps_from_json(j), InputError);
}

TEST_CASE("problem file") {
  auto dir = scratch("problem");
  DomainGrid g(1, 4, 2);
  write_json(dir / "gamma.json", plan_to_json(g, plan_of_map({2, 3, 0, 1})));
  json j{{"grid", grid_to_json(g)}, {"eta", "identity"}, {"gamma", "gamma.json"},
         {"backend", "entropic"}, {"epsilon", 0.01}, {"tol", 1e-9}, {"max_iter", 50}, {"v_max", 1}};
  auto p = problem_from_json(j, dir);
  CHECK(p.gamma.m == plan_of_map({2, 3, 0, 1}).m);
  CHECK(p.eta.m == identity_plan(4).m);
  CHECK(p.backend == Backend::Entropic);
  CHECK(p.epsilon == 0.01);
  CHECK(p.max_iter == 50);
  CHECK(p.grid.cap == 1);

  json m = j;
  m["gamma"] = json{{"map", {1, 2, 3, 0}}};
  CHECK(problem_from_json(m, dir).gamma.m == plan_of_map({1, 2, 3, 0}).m);

  json bad = j;
  bad["gama"] = 1;
  CHECK_THROWS_AS(problem_from_json(bad, dir), InputError);
  bad = j;
  bad["gamma"] = json{{"map", {1, 1, 3, 0}}};
  CHECK_THROWS_AS(problem_from_json(bad, dir), InputError);
  bad = j;
  bad["backend"] = "simplex";
  CHECK_THROWS_AS(problem_from_json(bad, dir), InputError);
  bad = j;
  bad["gamma"] = "missing.json";
  CHECK_THROWS_AS(problem_from_json(bad, dir), InputError);
  std::filesystem::remove_all(dir);
}
