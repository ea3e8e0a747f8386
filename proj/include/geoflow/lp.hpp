#pragma once

#include <string>
#include <vector>

namespace geoflow {

// Column of the constraint matrix in coordinate form.
struct SparseColumn {
  std::vector<int> rows;
  std::vector<double> vals;
};

// minimize c^T x  s.t.  A x = b,  x >= 0
struct LinearProgram {
  int num_rows = 0;
  std::vector<double> b;
  std::vector<SparseColumn> columns;
  std::vector<double> cost;
};

enum class LPStatus { Optimal, Infeasible, IterationLimit };

struct LPResult {
  LPStatus status = LPStatus::Infeasible;
  std::vector<double> x;
  std::vector<double> y;  // row duals, A^T y <= c at optimum
  double objective = 0.0;
  double dual_objective = 0.0;
  double phase1_residual = 0.0;
  int iterations = 0;
  int redundant_rows = 0;
};

struct LPOptions {
  double feas_tol = 1e-10;
  double opt_tol = 1e-11;
  double pivot_tol = 1e-9;
  int max_iterations = 1000000;
  int refactor_every = 64;
};

// Two-phase revised simplex with an explicit basis inverse.
// Dantzig pricing, Bland's rule after a run of degenerate pivots.
LPResult solve_lp(const LinearProgram& lp, const LPOptions& opt = {});

std::string to_string(LPStatus s);

}  // namespace geoflow
