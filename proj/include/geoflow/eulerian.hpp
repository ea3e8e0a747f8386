#pragma once

#include <map>
#include <utility>
#include <vector>

#include "geoflow/flow.hpp"

namespace geoflow {

// Per-label densities and edge flows. Values are probabilities within each label.
struct EulerianFlow {
  DomainGrid grid;
  std::vector<int> labels;              // labels present, sorted
  std::vector<Eigen::MatrixXd> c;       // per label entry: (K+1) x N
  // edges[i][k] : (x, x') -> mass, step k -> k+1
  std::vector<std::vector<std::map<std::pair<int, int>, double>>> edges;

  int label_slot(int a) const;  // -1 when absent
  // averaged velocity (physical units) at (k, x) for label slot i, k < K
  std::array<double, 2> velocity(int i, int k, int x) const;
  void validate(double tol = 1e-12) const;
};

EulerianFlow from_path_measure(const PathMeasure& eta);
PathMeasure to_path_measure(const EulerianFlow& ef);

// averaged-velocity action
double eulerian_action(const EulerianFlow& ef);
// sum of n^{-d} m |dx|^2 / (2 dt)
double edge_cost_action(const EulerianFlow& ef);

// max per-label continuity / mass defect
double continuity_residual(const EulerianFlow& ef);
// max |sum_a n^{-d} c(k, x, a) - n^{-d}|, in density units
double incompressibility_residual(const EulerianFlow& ef);

// Acceleration per unit mass at interior nodes, component `axis`: rows k-1, cols x.
Eigen::MatrixXd eulerian_acceleration(const EulerianFlow& ef, int axis);
PressureField pressure_from_eulerian(const EulerianFlow& ef);
// max |grad_h p + acceleration| over interior nodes (central differences)
double pressure_gradient_residual(const EulerianFlow& ef, const PressureField& p);

}  // namespace geoflow
