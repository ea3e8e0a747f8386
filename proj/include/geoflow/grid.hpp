#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace geoflow {

enum class Geometry { Torus, Cube };

std::string to_string(Geometry g);
Geometry geometry_from_string(const std::string& s);

// Integer displacement in cell units, one entry per axis (unused axes are 0).
using Offset = std::array<int, 2>;

// Space-time lattice. Cells are flattened as i0 + n*i1.
// cap is the per-step velocity cap in cells per axis.
struct DomainGrid {
  int d = 1;
  int n = 4;
  int K = 2;
  Geometry geometry = Geometry::Torus;
  int cap = 2;

  DomainGrid() = default;
  DomainGrid(int d_, int n_, int K_, Geometry g = Geometry::Torus, int cap_ = 2);

  void validate() const;

  int num_cells() const;
  double dx() const { return 1.0 / n; }
  double dt() const { return 1.0 / K; }
  double time(int k) const { return static_cast<double>(k) / K; }
  double cell_mass() const;

  Offset coords(int cell) const;
  int index(const Offset& c) const;
  void check_cell(int cell) const;

  // Minimal representative on the torus (a tie at n/2 goes positive), plain difference on the cube.
  Offset displacement(int x, int y) const;
  double dist2(int x, int y) const;
  bool step_allowed(int x, int y) const;

  // Cells reachable in one step from x, sorted by index.
  std::vector<int> neighbors(int x) const;
  // Minimal number of steps needed to go from x to y under the cap (-1 if never).
  int steps_needed(int x, int y) const;

  std::array<double, 2> center(int cell) const;

  bool operator==(const DomainGrid& o) const {
    return d == o.d && n == o.n && K == o.K && geometry == o.geometry && cap == o.cap;
  }
};

double torus_distance(const DomainGrid& grid, int x, int y);

}  // namespace geoflow
