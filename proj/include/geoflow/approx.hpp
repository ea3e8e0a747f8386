#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "geoflow/flow.hpp"

namespace geoflow {

using Point = std::array<double, 2>;

// A cube of side `side` carrying `weight` of mass, rigidly translated through `centers` (one per time node).
struct Tube {
  int label = 0;
  std::vector<Point> centers;
  double side = 0.0;
  double weight = 0.0;
};

// Continuous version of a discrete flow on explicit time nodes.
// Everything outside the tubes is the steady frame [0,1]^d \ [2 eps, 1 - 2 eps]^d (absent when eps = 0).
struct ShrunkFlow {
  int d = 1;
  int n = 1;
  Geometry geometry = Geometry::Cube;
  std::vector<double> times;
  std::vector<Tube> tubes;
  double eps = 0.0;
  double steady_weight = 0.0;

  double transported_weight() const;
  double action() const;
};

// Tubes of full cell size on the uniform nodes of eta.
ShrunkFlow lift_flow(const PathMeasure& eta);
// Concentric shrink x -> 2 eps + (1 - 4 eps) x, steady on [0, eps], then eta rescaled into [eps, 1].
ShrunkFlow shrink_flow(const PathMeasure& eta, double eps);

struct Sample {
  int tube = -1;  // -1: steady frame
  int label = 0;
  std::vector<Point> x;
};

// N independent draws; reproducible from the seed alone.
std::vector<Sample> sample_paths(const ShrunkFlow& f, int N, std::uint64_t seed);
double sample_action(const std::vector<Sample>& s, const std::vector<double>& times, int d);

// eps^{-d} c_d (1 - |y|^2)^2 on |y| < 1, images reflected at the faces of [0,1]^d.
double bump_kernel(int d, double eps, const Point& center, const Point& x);

// Volume correction zeta with zeta_# rho = 1. Spectral Neumann Poisson solve on a cell-centred
// G^d grid, then the flow of grad(phi) / ((1 - s) rho + s) for s in [0, 1].
class MoserMap {
 public:
  MoserMap() = default;  // identity
  MoserMap(int d, int G, const Eigen::VectorXd& rho, int steps = 32);

  bool is_identity() const { return G_ == 0; }
  Point forward(const Point& x) const;
  Point backward(const Point& z) const;
  // spectral interpolant of the normalized input density
  double density(const Point& x) const;
  double min_density() const { return min_rho_; }
  // max |rho(zeta^{-1} z) det D zeta^{-1}(z) - 1| on an m^d lattice of cell centres
  double residual(int m = 16) const;

 private:
  void eval(const Point& x, double s, Point& v) const;
  Point flow(Point x, double s0, double s1) const;

  int d_ = 1, G_ = 0, steps_ = 32;
  Eigen::MatrixXd rc_, pc_;  // cosine coefficients of rho and phi, G x (G or 1)
  double min_rho_ = 1.0;
};

struct MollifiedFlow {
  int d = 1;
  double eps = 0.0;
  int G = 0;
  std::vector<double> times;
  std::vector<Sample> samples;
  std::vector<Eigen::VectorXd> rho;  // rho^N(t_k, .) at the G^d cell centres, one per node
  std::vector<MoserMap> correction;  // filled by moser_correct
  std::vector<double> residual;      // corrected density residual per node

  // a_i(x)
  double kernel(int i, const Point& x) const;
  // (1/N) sum_i a_i(x + w_i(0) - w_i(t_k))
  double density(int k, const Point& x) const;
  double sup_error() const;  // max |rho^N - 1| on the grid
};

MollifiedFlow mollify(const std::vector<Sample>& samples, const std::vector<double>& times, int d, double eps,
                      int G = 64);
// Throws std::runtime_error when some rho^N(t_k) is not bounded away from 0.
MollifiedFlow moser_correct(const MollifiedFlow& mf, double min_density = 0.05);

// Rearrangement on [0, eps]: refined cell y follows sample kernel[y] and sits in cell position[y] at t = eps.
struct SplitResult {
  int R = 0;  // refined cells per axis
  std::vector<int> kernel;
  std::vector<int> position;
  double added_action = 0.0;
  double budget_estimate = 0.0;  // sum over regions of (M^2 / eps) delta^{d+2} / bbar^2
  int regions = 0;
  int multi_kernel_regions = 0;
  int uncovered_cells = 0;
  std::vector<std::array<int, 4>> multi_regions;  // lo0, hi0, lo1, hi1 of regions split by 1D interpolation
};

SplitResult deterministic_split(const MollifiedFlow& mf, double alpha, int R);

// Discrete flow of maps: one permutation of the refined cells per time node, g(t_0) = id.
struct MPMapFlow {
  int d = 1;
  int n = 1;
  int refine = 4;
  Geometry geometry = Geometry::Cube;
  std::vector<double> times;
  std::vector<std::vector<int>> maps;

  int cells_per_axis() const { return n * refine; }
  int num_cells() const;
  Point center(int cell) const;
  double dist2(int x, int y) const;
  double action() const;
  // max over nodes of |#preimages - 1|; 0 for bijections
  double density_residual() const;
  bool all_bijections() const;
};

// W2 between the plan (y, g(1, y)) and eta's endpoint plan spread over refined subcells, both as
// measures on D x D. Masses are rounded to 2 R^d equal atoms and matched by assignment.
double endpoint_w2(const MPMapFlow& g, const PathMeasure& eta);

struct ApproxOptions {
  int N = 1000;
  double eps = 0.05;
  double alpha = 0.05;
  std::uint64_t seed = 42;
  int refine = 4;
  double tol_rho = 1e-3;
  int max_retries = 5;
};

struct ApproxReport {
  MPMapFlow flow;
  double target_action = 0.0;
  double action = 0.0;
  double action_error = 0.0;
  double endpoint_w2 = 0.0;
  double shrunk_action = 0.0;
  double sample_action = 0.0;
  double rho_sup_error = 0.0;
  double correction_residual = 0.0;
  double added_action = 0.0;
  int attempts = 0;
  std::uint64_t seed_used = 0;
  bool short_circuit = false;
};

// shrink -> sample -> mollify -> correct -> split -> snap to permutations.
ApproxReport approximate(const PathMeasure& eta, const ApproxOptions& opt);

bool is_bijection(const std::vector<int>& g);

}  // namespace geoflow
