#include <cmath>
#include <random>

#include "doctest.h"
#include "geoflow/approx.hpp"
#include "geoflow/chefatica.hpp"
#include "helpers.hpp"

using namespace geoflow;
using namespace testutil;

namespace {

// pairs of neighbouring cells along axis 0 exchange half of their mass in one step
PathMeasure half_swap(int d, int n) {
  DomainGrid g(d, n, 1, Geometry::Cube, 1);
  PathMeasure eta;
  eta.grid = g;
  double w = g.cell_mass();
  for (int a = 0; a < g.num_cells(); ++a) {
    auto c = g.coords(a);
    auto o = c;
    o[0] ^= 1;
    eta.paths.push_back({a, {a, a}, w / 2});
    eta.paths.push_back({a, {a, g.index(o)}, w / 2});
  }
  return eta;
}

// neighbouring cells swap fully at the first step and stay
PathMeasure swap_flow(int n) {
  DomainGrid g(2, n, 2, Geometry::Cube, 1);
  PathMeasure eta;
  eta.grid = g;
  for (int a = 0; a < g.num_cells(); ++a) {
    auto c = g.coords(a);
    c[0] ^= 1;
    int b = g.index(c);
    eta.paths.push_back({a, {a, b, b}, g.cell_mass()});
  }
  return eta;
}

double quad_mass(int d, double eps, const Point& c, int m) {
  double s = 0.0;
  for (int i1 = 0; i1 < (d == 2 ? m : 1); ++i1)
    for (int i0 = 0; i0 < m; ++i0) s += bump_kernel(d, eps, c, {(i0 + 0.5) / m, d == 2 ? (i1 + 0.5) / m : 0.0});
  return s / std::pow(m, d);
}

}  // namespace

TEST_CASE("shrink weights and action factor") {
  auto eta = half_swap(2, 4);
  double A = action_of_measure(eta);
  auto sf = shrink_flow(eta, 0.1);
  CHECK(sf.transported_weight() == doctest::Approx(0.36).epsilon(1e-14));
  CHECK(sf.steady_weight == doctest::Approx(0.64).epsilon(1e-14));
  CHECK(sf.action() == doctest::Approx(std::pow(0.6, 4) / 0.9 * A).epsilon(1e-13));
  // steady initial segment, tubes inside the shrunk cube
  for (const auto& t : sf.tubes) {
    CHECK(t.centers[0] == t.centers[1]);
    for (const auto& c : t.centers)
      for (int j = 0; j < 2; ++j) {
        CHECK(c[j] - t.side / 2 >= 0.2 - 1e-15);
        CHECK(c[j] + t.side / 2 <= 0.8 + 1e-15);
      }
  }
  REQUIRE(sf.times.size() == 3);
  CHECK(sf.times[1] == doctest::Approx(0.1));
}

TEST_CASE("shrunk action increases to the original") {
  auto eta = half_swap(2, 4);
  double A = action_of_measure(eta), prev = 0.0;
  for (int j = 4; j <= 14; ++j) {
    double a = shrink_flow(eta, std::ldexp(1.0, -j)).action();
    CHECK(a > prev);
    CHECK(a < A);
    prev = a;
  }
  CHECK(prev == doctest::Approx(A).epsilon(1e-3));
}

TEST_CASE("shrink preconditions") {
  auto tr = translation_flow(DomainGrid(1, 4, 2), 1);
  CHECK_THROWS_AS(shrink_flow(tr, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(shrink_flow(half_swap(1, 4), 0.125), std::invalid_argument);
  CHECK_THROWS_AS(shrink_flow(half_swap(1, 4), 0.0), std::invalid_argument);
}

TEST_CASE("sampling") {
  DomainGrid g(1, 2, 1, Geometry::Cube, 1);
  PathMeasure one;
  one.grid = g;
  one.paths.push_back({0, {0, 1}, 1.0});
  for (const auto& s : sample_paths(lift_flow(one), 50, 1)) CHECK(s.tube == 0);

  PathMeasure two;
  two.grid = g;
  two.paths.push_back({0, {0, 0}, 0.25});
  two.paths.push_back({0, {0, 1}, 0.75});
  const int N = 10000;
  auto s = sample_paths(lift_flow(two), N, 9);
  int hits = 0;
  for (const auto& x : s) hits += x.tube == 1;
  double sigma = std::sqrt(N * 0.75 * 0.25);
  CHECK(std::abs(hits - 0.75 * N) <= 3 * sigma);

  auto a = sample_paths(lift_flow(two), 100, 5), b = sample_paths(lift_flow(two), 100, 5);
  auto c = sample_paths(lift_flow(two), 100, 6);
  bool same = true, differ = false;
  for (int i = 0; i < 100; ++i) {
    same = same && a[i].tube == b[i].tube && a[i].x == b[i].x;
    differ = differ || a[i].x != c[i].x;
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("empirical action approaches the flow action") {
  auto eta = half_swap(2, 4);
  auto sf = shrink_flow(eta, 0.05);
  double prev = 1e9;
  for (int N : {100, 10000, 200000}) {
    double err = std::abs(sample_action(sample_paths(sf, N, 17), sf.times, 2) - sf.action());
    CHECK(err < prev + 1e-4);
    prev = err;
  }
  CHECK(prev < 0.03 * sf.action());
}

TEST_CASE("kernels have unit mass") {
  for (double eps : {0.1, 0.05})
    for (Point c : {Point{0.5, 0.5}, Point{0.02, 0.5}, Point{0.03, 0.97}, Point{0.0, 0.0}}) {
      CHECK(quad_mass(2, eps, c, 800) == doctest::Approx(1.0).epsilon(2e-4));
      CHECK(quad_mass(1, eps, {c[0], 0.0}, 4000) == doctest::Approx(1.0).epsilon(1e-5));
    }
  CHECK(bump_kernel(2, 0.1, {0.5, 0.5}, {0.61, 0.5}) == 0.0);
  CHECK(bump_kernel(2, 0.1, {0.5, 0.5}, {0.5, 0.5}) == doctest::Approx(300.0 / M_PI));
}

TEST_CASE("mollified density follows the kernel formula") {
  auto eta = half_swap(2, 4);
  auto sf = shrink_flow(eta, 0.05);
  auto s = sample_paths(sf, 300, 2);
  auto mf = mollify(s, sf.times, 2, 0.05, 16);
  for (int k = 0; k < 3; ++k)
    for (int cell = 0; cell < 256; cell += 7) {
      Point x{(cell % 16 + 0.5) / 16, (cell / 16 + 0.5) / 16};
      CHECK(mf.rho[k][cell] == doctest::Approx(mf.density(k, x)).epsilon(1e-12));
    }
  // steady on [0, eps]
  CHECK((mf.rho[0] - mf.rho[1]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mollified density error decays with N") {
  auto st = constant_flow(DomainGrid(2, 4, 1, Geometry::Cube, 1));
  auto f = lift_flow(st);
  double prev = 1e9;
  for (int N : {100, 1000, 10000}) {
    auto mf = mollify(sample_paths(f, N, 11), f.times, 2, 0.1, 32);
    double e = mf.sup_error();
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("moser correction") {
  // uniform input: identity
  MoserMap id(2, 16, Eigen::VectorXd::Ones(256));
  for (Point p : {Point{0.1, 0.7}, Point{0.5, 0.5}}) {
    auto q = id.forward(p);
    CHECK(q[0] == p[0]);
    CHECK(q[1] == p[1]);
  }
  CHECK(id.residual() < 1e-9);

  // smooth bump
  const int G = 32;
  Eigen::VectorXd rho(G * G);
  for (int c = 0; c < G * G; ++c) {
    double x = (c % G + 0.5) / G, y = (c / G + 0.5) / G;
    rho[c] = 1.0 + 0.5 * std::cos(M_PI * x) * std::cos(2 * M_PI * y);
  }
  MoserMap z(2, G, rho);
  CHECK(z.residual() <= 1e-3);
  // forward and backward are inverse
  Point p{0.3, 0.8};
  auto q = z.backward(z.forward(p));
  CHECK(std::hypot(q[0] - p[0], q[1] - p[1]) < 1e-6);
  // mass moves out of the dense corner
  auto m = z.forward({0.1, 0.1});
  CHECK(m[0] + m[1] > 0.2);

  // sampled steady flow
  auto f = lift_flow(constant_flow(DomainGrid(2, 4, 1, Geometry::Cube, 1)));
  auto mf = moser_correct(mollify(sample_paths(f, 10000, 4), f.times, 2, 0.1, 32));
  for (double r : mf.residual) CHECK(r <= 1e-3);

  Eigen::VectorXd hole = rho;
  hole[5] = 0.0;
  CHECK_THROWS_AS(MoserMap(2, G, hole), std::runtime_error);
  auto sparse = mollify(sample_paths(f, 20, 4), f.times, 2, 0.05, 32);
  CHECK_THROWS_AS(moser_correct(sparse), std::runtime_error);
}

TEST_CASE("split with a single kernel is the identity") {
  MollifiedFlow mf;
  mf.d = 1;
  mf.eps = 0.45;
  mf.times = {0.0, 0.1, 1.0};
  Sample s;
  s.x.assign(3, Point{0.5, 0.0});
  mf.samples = {s};
  auto r = deterministic_split(mf, 0.05, 16);
  for (int y = 0; y < 16; ++y) {
    CHECK(r.kernel[y] == 0);
    CHECK(r.position[y] == y);
  }
  CHECK(r.added_action == 0.0);
}

TEST_CASE("two overlapping kernels reduce to the 1D interpolation") {
  MollifiedFlow mf;
  mf.d = 1;
  mf.eps = 0.4;
  mf.times = {0.0, 0.1, 1.0};
  for (double c : {0.45, 0.55}) {
    Sample s;
    s.x.assign(3, Point{c, 0.0});
    mf.samples.push_back(s);
  }
  const int R = 32;
  auto r = deterministic_split(mf, 10.0, R);
  REQUIRE(r.multi_kernel_regions >= 1);
  CHECK(is_bijection(r.position));
  for (const auto& box : r.multi_regions) {
    int lo = box[0], m = box[1] - box[0];
    std::vector<std::vector<double>> b(2, std::vector<double>(m));
    for (int p = 0; p < m; ++p) {
      Point x{(lo + p + 0.5) / R, 0.0};
      double a0 = bump_kernel(1, 0.4, {0.45, 0.0}, x), a1 = bump_kernel(1, 0.4, {0.55, 0.0}, x);
      b[0][p] = a0 / (a0 + a1);
      b[1][p] = 1.0 - b[0][p];
    }
    Chefatica ch(b);
    std::vector<std::pair<double, int>> t;
    for (int p = 0; p < m; ++p) t.push_back({ch.map(1.0, (p + 0.5) / m), p});
    std::stable_sort(t.begin(), t.end(), [](auto& x, auto& y) { return x.first < y.first; });
    for (int q = 0; q < m; ++q) {
      CHECK(r.position[lo + t[q].second] == lo + q);
      CHECK(r.kernel[lo + t[q].second] == ((t[q].second + 0.5) / m < ch.length(0) ? 0 : 1));
    }
  }
  CHECK(r.added_action <= r.budget_estimate + 1e-12);
}

TEST_CASE("split on random overlaps stays within budget") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  for (int t = 0; t < 10; ++t) {
    MollifiedFlow mf;
    mf.d = t % 2 ? 2 : 1;
    mf.eps = 0.3;
    mf.times = {0.0, 0.3, 1.0};
    for (int i = 0; i < 2 + t % 3; ++i) {
      Sample s;
      s.x.assign(3, Point{u(rng), mf.d == 2 ? u(rng) : 0.0});
      mf.samples.push_back(s);
    }
    auto r = deterministic_split(mf, 0.05, 16);
    CHECK(r.added_action <= 0.05);
    CHECK(is_bijection(r.position));
    for (int k : r.kernel) CHECK(k >= 0);
    // cells move only inside their region
    const int R = 16;
    for (const auto& box : r.multi_regions)
      for (int i1 = box[2]; i1 < box[3]; ++i1)
        for (int i0 = box[0]; i0 < box[1]; ++i0) {
          int p = r.position[i0 + R * i1];
          int p0 = mf.d == 2 ? p % R : p, p1 = mf.d == 2 ? p / R : 0;
          CHECK(p0 >= box[0]);
          CHECK(p0 < box[1]);
          CHECK(p1 >= box[2]);
          CHECK(p1 < box[3]);
        }
  }
}

TEST_CASE("endpoint W2 against a hand computation") {
  DomainGrid g(1, 2, 1, Geometry::Cube, 1);
  PathMeasure eta;
  eta.grid = g;
  for (int a = 0; a < 2; ++a) {
    eta.paths.push_back({a, {a, a}, 0.25});
    eta.paths.push_back({a, {a, 1 - a}, 0.25});
  }
  MPMapFlow f;
  f.d = 1;
  f.n = 2;
  f.refine = 1;
  f.times = {0.0, 1.0};
  f.maps = {{0, 1}, {0, 1}};
  // half of each atom has to move by 1/2 in one coordinate
  CHECK(endpoint_w2(f, eta) == doctest::Approx(std::sqrt(0.125)).epsilon(1e-12));
}

TEST_CASE("deterministic flows are lifted exactly") {
  auto eta = swap_flow(4);
  ApproxOptions o;
  o.refine = 2;
  auto r = approximate(eta, o);
  CHECK(r.short_circuit);
  CHECK(r.flow.all_bijections());
  CHECK(r.action_error <= 1e-6);
  CHECK(r.endpoint_w2 == 0.0);

  auto tr = translation_flow(DomainGrid(1, 4, 2), 1);
  auto r2 = approximate(tr, o);
  CHECK(r2.action == doctest::Approx(action_of_measure(tr)).epsilon(1e-14));
  CHECK(r2.endpoint_w2 == 0.0);
  CHECK(r2.flow.maps.back()[0] == 4);
}

TEST_CASE("pipeline on a splitting flow") {
  auto eta = half_swap(2, 4);
  ApproxOptions o;
  o.N = 1000;
  o.eps = 0.05;
  o.seed = 3;
  auto r = approximate(eta, o);
  CHECK_FALSE(r.short_circuit);
  CHECK(r.flow.all_bijections());
  CHECK(r.flow.density_residual() == 0.0);
  CHECK(r.flow.maps.size() == 3);
  CHECK(r.correction_residual <= 1e-3);
  CHECK(r.added_action <= 0.05);
  CHECK(r.action > 0.0);
  CHECK(r.endpoint_w2 > 0.0);
  auto again = approximate(eta, o);
  CHECK(again.flow.maps == r.flow.maps);
  CHECK(again.action == r.action);

  auto torus = eta;
  torus.grid.geometry = Geometry::Torus;
  CHECK_THROWS_AS(approximate(torus, o), std::invalid_argument);
}
