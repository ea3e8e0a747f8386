#include "geoflow/grid.hpp"

#include <cmath>
#include <cstdlib>

namespace geoflow {

std::string to_string(Geometry g) { return g == Geometry::Torus ? "torus" : "cube"; }

Geometry geometry_from_string(const std::string& s) {
  if (s == "torus" || s == "periodic") return Geometry::Torus;
  if (s == "cube") return Geometry::Cube;
  throw std::invalid_argument("unknown geometry '" + s + "'");
}

DomainGrid::DomainGrid(int d_, int n_, int K_, Geometry g, int cap_)
    : d(d_), n(n_), K(K_), geometry(g), cap(cap_) {
  validate();
}

void DomainGrid::validate() const {
  if (d != 1 && d != 2) throw std::invalid_argument("grid dimension must be 1 or 2");
  if (n < 2) throw std::invalid_argument("grid needs n >= 2");
  if (K < 1) throw std::invalid_argument("grid needs K >= 1");
  if (cap < 0) throw std::invalid_argument("velocity cap must be >= 0");
}

int DomainGrid::num_cells() const { return d == 1 ? n : n * n; }

double DomainGrid::cell_mass() const { return 1.0 / num_cells(); }

Offset DomainGrid::coords(int cell) const {
  if (d == 1) return {cell, 0};
  return {cell % n, cell / n};
}

int DomainGrid::index(const Offset& c) const { return d == 1 ? c[0] : c[0] + n * c[1]; }

void DomainGrid::check_cell(int cell) const {
  if (cell < 0 || cell >= num_cells())
    throw std::out_of_range("cell index " + std::to_string(cell) + " out of range");
}

static int wrap_disp(int delta, int n) {
  int r = ((delta % n) + n) % n;  // 0..n-1
  if (2 * r > n) r -= n;          // r in (-n/2, n/2], tie stays positive
  return r;
}

Offset DomainGrid::displacement(int x, int y) const {
  Offset a = coords(x), b = coords(y);
  Offset out{0, 0};
  for (int j = 0; j < d; ++j) {
    int delta = b[j] - a[j];
    out[j] = geometry == Geometry::Torus ? wrap_disp(delta, n) : delta;
  }
  return out;
}

double DomainGrid::dist2(int x, int y) const {
  Offset o = displacement(x, y);
  double h = dx();
  return (o[0] * h) * (o[0] * h) + (o[1] * h) * (o[1] * h);
}

bool DomainGrid::step_allowed(int x, int y) const {
  Offset o = displacement(x, y);
  return std::abs(o[0]) <= cap && std::abs(o[1]) <= cap;
}

std::vector<int> DomainGrid::neighbors(int x) const {
  std::vector<int> out;
  int N = num_cells();
  // direct scan keeps the result sorted and deduplicated mod n
  for (int y = 0; y < N; ++y)
    if (step_allowed(x, y)) out.push_back(y);
  return out;
}

int DomainGrid::steps_needed(int x, int y) const {
  Offset o = displacement(x, y);
  int m = 0;
  for (int j = 0; j < d; ++j) {
    int a = std::abs(o[j]);
    if (a == 0) continue;
    if (cap == 0) return -1;
    m = std::max(m, (a + cap - 1) / cap);
  }
  return m;
}

std::array<double, 2> DomainGrid::center(int cell) const {
  Offset c = coords(cell);
  return {(c[0] + 0.5) / n, d == 2 ? (c[1] + 0.5) / n : 0.0};
}

double torus_distance(const DomainGrid& grid, int x, int y) {
  grid.check_cell(x);
  grid.check_cell(y);
  return std::sqrt(grid.dist2(x, y));
}

}  // namespace geoflow
