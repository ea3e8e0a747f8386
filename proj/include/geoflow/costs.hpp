#pragma once

#include <Eigen/Dense>
#include <vector>

#include "geoflow/flow.hpp"

namespace geoflow {

// c^{s,t}_q on cells x cells; +inf entries are flagged in `finite`, never stored as sentinels.
struct CostMatrix {
  int s = 0, t = 1;
  Eigen::MatrixXd c;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> finite;
  // one argmin path per (x, y), nodes s..t; empty when infinite
  std::vector<std::vector<int>> argmin;

  int size() const { return static_cast<int>(c.rows()); }
  bool is_finite(int x, int y) const { return finite(x, y); }
  const std::vector<int>& path(int x, int y) const { return argmin[static_cast<size_t>(x) * size() + y]; }
};

// Running cost of the step arriving at node k: -q(t_k, x) dt on interior nodes, 0 at k = 0, K.
double running_cost(const DomainGrid& grid, const PressureField& q, int k, int x);
// L_q of the node sequence `nodes` placed on s..s+len-1.
double lagrangian_cost(const DomainGrid& grid, const PressureField& q, const std::vector<int>& nodes, int s);

CostMatrix dp_cost(const DomainGrid& grid, const PressureField& q, int s, int t);

struct MinimalityResult {
  bool verdict = true;
  double gap = 0.0;
  int worst_s = 0, worst_t = 0;
};

// `nodes` is a full path on 0..K.
MinimalityResult is_q_minimizing(const DomainGrid& grid, const std::vector<int>& nodes, const PressureField& q,
                                 int s, int t, double tol);
// Checks every node subinterval of [s, t].
MinimalityResult is_locally_q_minimizing(const DomainGrid& grid, const std::vector<int>& nodes,
                                         const PressureField& q, double tol);

struct OTResult {
  bool feasible = false;
  double value = 0.0;
  Eigen::MatrixXd plan;
  Eigen::VectorXd u, v;  // potentials: u(x) + v(y) <= c(x, y), value = <u, mu1> + <v, mu2>
  double dual_value = 0.0;
  double max_dual_violation = 0.0;
};

OTResult ot_value(const CostMatrix& cost, const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2);
OTResult ot_value(const Eigen::MatrixXd& cost, const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2);

// W2^2 between two plans viewed as measures on D x D with cost d^2/2 + d^2/2.
double plan_w2_squared(const DomainGrid& grid, const TransportPlan& a, const TransportPlan& b);

std::vector<double> k_bound(const DomainGrid& grid, const PressureField& q, int s, int t);

PressureField smooth_pressure(const DomainGrid& grid, const PressureField& p, double eps);
std::vector<double> dyadic_schedule(const DomainGrid& grid);
PressureField maximal_function(const DomainGrid& grid, const PressureField& p);
PressureField precise_representative(const DomainGrid& grid, const PressureField& p,
                                     const std::vector<double>& schedule);

}  // namespace geoflow
