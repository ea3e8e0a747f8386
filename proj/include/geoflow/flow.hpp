#pragma once

#include <Eigen/Dense>
#include <map>
#include <utility>
#include <vector>

#include "geoflow/grid.hpp"

namespace geoflow {

struct GridPath {
  int label = 0;
  std::vector<int> nodes;  // K+1 cell indices
  double weight = 0.0;
};

// Discrete generalized flow: weighted, labeled paths. Total weight 1, label a carries n^{-d}.
struct PathMeasure {
  DomainGrid grid;
  std::vector<GridPath> paths;

  int steps() const { return grid.K; }
  double total_weight() const;
  // Throws if weights are negative, caps are violated or label marginals are off.
  void validate(double tol = 1e-12) const;
  std::vector<double> label_mass() const;
};

// Plan on cells x cells, row = label (first coordinate), column = position.
struct TransportPlan {
  Eigen::MatrixXd m;

  TransportPlan() = default;
  explicit TransportPlan(Eigen::MatrixXd mat) : m(std::move(mat)) {}
  int size() const { return static_cast<int>(m.rows()); }
  // Returns -1 when valid, otherwise the first offending row (or N + column).
  int first_bad_marginal(double tol = 1e-12) const;
  void validate(double tol = 1e-12) const;
  // Per-label conditional measure eta_a = n^d * m(a, .)
  Eigen::VectorXd conditional(int a) const;
  bool is_deterministic() const;
};

TransportPlan identity_plan(int N);
TransportPlan plan_of_map(const std::vector<int>& g);

// rho(t_k, x) for k = 0..K, stored as (K+1) x N.
struct DensityField {
  Eigen::MatrixXd rho;
  void validate(double tol = 1e-12) const;
};

// p(t_k, x) for interior nodes k = 1..K-1, row k-1.
struct PressureField {
  Eigen::MatrixXd p;

  PressureField() = default;
  PressureField(int K, int N) : p(Eigen::MatrixXd::Zero(std::max(K - 1, 0), N)) {}
  int interior_slices() const { return static_cast<int>(p.rows()); }
  double at(int k, int x) const { return p(k - 1, x); }
  double& at(int k, int x) { return p(k - 1, x); }
  void normalize_mean_zero();
  double max_slice_mean() const;
};

// Sparse per-label two-time plan lambda_a^{s,t}, entries normalized as a probability.
struct LabelPlan {
  int label = 0;
  std::map<std::pair<int, int>, double> entries;
};

double path_action(const DomainGrid& grid, const std::vector<int>& nodes);
double action_of_measure(const PathMeasure& eta);
DensityField density_of(const PathMeasure& eta);
double incompressibility_residual(const PathMeasure& eta);

// Aggregated (e_s, e_t) plan of eta.
TransportPlan endpoint_plan(const PathMeasure& eta, int s, int t);
// Per-label plans lambda_a^{s,t} (only labels with positive mass).
std::vector<LabelPlan> endpoint_plans_per_label(const PathMeasure& eta, int s, int t);
// Plan (label, position at node k).
TransportPlan label_plan(const PathMeasure& eta, int k);

PathMeasure restrict(const PathMeasure& eta, int s, int t);
PathMeasure concatenate(const PathMeasure& eta1, const PathMeasure& eta2, double tol = 1e-12);
std::vector<double> speed_profile(const PathMeasure& eta);

// Sum over paths of w * sum_k |step|^2 (undivided step energy).
double step_energy(const PathMeasure& eta);

// Merge paths with identical (label, nodes) and sort canonically.
PathMeasure canonicalize(const PathMeasure& eta, double drop_below = 0.0);

}  // namespace geoflow
