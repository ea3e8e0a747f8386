#include "geoflow/instances.hpp"

namespace geoflow {

std::vector<int> reflection_map(const DomainGrid& g) {
  std::vector<int> m(g.num_cells());
  for (int x = 0; x < g.num_cells(); ++x) {
    auto c = g.coords(x);
    for (int j = 0; j < g.d; ++j) c[j] = (g.n - c[j]) % g.n;
    m[x] = g.index(c);
  }
  return m;
}

std::vector<int> translation_map(const DomainGrid& g, int shift) {
  std::vector<int> m(g.num_cells());
  for (int x = 0; x < g.num_cells(); ++x) {
    auto c = g.coords(x);
    c[0] = ((c[0] + shift) % g.n + g.n) % g.n;
    m[x] = g.index(c);
  }
  return m;
}

GeodesicProblem reflection_problem(const DomainGrid& g) {
  GeodesicProblem p;
  p.grid = g;
  p.eta = identity_plan(g.num_cells());
  p.gamma = plan_of_map(reflection_map(g));
  return p;
}

GeodesicProblem translation_problem(const DomainGrid& g) {
  GeodesicProblem p;
  p.grid = g;
  p.eta = identity_plan(g.num_cells());
  p.gamma = plan_of_map(translation_map(g, g.n / 2));
  return p;
}

PathMeasure half_swap_flow(int d, int n) {
  DomainGrid g(d, n, 1, Geometry::Cube, 1);
  PathMeasure eta;
  eta.grid = g;
  double w = g.cell_mass() / 2;
  for (int a = 0; a < g.num_cells(); ++a) {
    auto o = g.coords(a);
    o[0] ^= 1;
    eta.paths.push_back({a, {a, a}, w});
    eta.paths.push_back({a, {a, g.index(o)}, w});
  }
  return eta;
}

}  // namespace geoflow
