#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geoflow/flow.hpp"

namespace geoflow {

enum class Backend { Exact, Entropic };

std::string to_string(Backend b);
Backend backend_from_string(const std::string& s);

struct GeodesicProblem {
  DomainGrid grid;
  TransportPlan eta;    // initial plan (label, position)
  TransportPlan gamma;  // final plan (label, position)
  Backend backend = Backend::Exact;
  double epsilon = 1e-2;
  double tol = 1e-8;
  int max_iter = 200000;
  std::int64_t path_budget = 10000000;
  // exact backend: return the max-entropy point of the optimal face instead of a simplex vertex
  bool central = false;

  void validate() const;
};

struct SolverDiagnostics {
  std::string backend;
  int iterations = 0;
  double primal_value = 0.0;
  double dual_value = 0.0;
  double gap = 0.0;                 // |primal - dual| (exact) or marginal error (entropic)
  double marginal_error = 0.0;      // entropic: max |rho - 1|; exact: residual of rho*
  double dual_infeasibility = 0.0;  // exact: max(0, -reduced cost)
  double complementary_slackness = 0.0;
  std::int64_t num_paths = 0;
  int num_rows = 0;
  bool converged = true;
  bool short_circuit = false;
};

struct GeodesicSolution {
  PathMeasure flow;
  double value = 0.0;
  PressureField pressure;
  SolverDiagnostics diag;
  // endpoint duals of the exact backend, (label, cell) -> value; empty otherwise
  Eigen::MatrixXd start_dual, end_dual;
};

struct PathSet {
  DomainGrid grid;
  std::vector<int> labels;
  std::vector<int> nodes;  // flattened, K+1 per path
  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  std::vector<int> path(std::int64_t i) const;
};

// All node sequences under the cap, anchored at every label (count = N * per-label count).
std::int64_t count_paths(const DomainGrid& grid);
PathSet enumerate_paths(const DomainGrid& grid, std::int64_t budget = 10000000);
// Paths of label a that start in supp eta_a and end in supp gamma_a, lexicographic order.
PathSet enumerate_problem_paths(const GeodesicProblem& prob);

GeodesicSolution solve_exact(const GeodesicProblem& prob);
GeodesicSolution solve_entropic(const GeodesicProblem& prob);
GeodesicSolution solve(const GeodesicProblem& prob);

// A(nu) - A(eta) - <p, rho^nu - 1>
double dual_gap(const PathMeasure& eta_opt, const PressureField& p, const PathMeasure& nu, double tol = 1e-9);

// <p, rho - 1> with the interior-node quadrature used by the solver.
double pressure_pairing(const PressureField& p, const PathMeasure& nu);

}  // namespace geoflow
