#pragma once

#include <string>
#include <utility>
#include <vector>

#include "geoflow/costs.hpp"
#include "geoflow/flow.hpp"

namespace geoflow {

struct FirstConditionReport {
  double max_gap = 0.0;
  int worst_path = -1;  // index into eta.paths
  int worst_s = 0, worst_t = 0;
  // sum over support paths of w * gap on the full interval
  double weighted_gap = 0.0;
};

struct SecondConditionReport {
  double max_gap = 0.0;
  int worst_label = -1;
  int worst_s = 0, worst_t = 0;
  int intervals_checked = 0;
  // sum over labels of n^{-d} * gap on the full interval (if tested)
  double weighted_gap = 0.0;
};

struct CertificateReport {
  FirstConditionReport first;
  SecondConditionReport second;
  double identity_residual = 0.0;  // |sum_w L_q - sum_a n^{-d} W_a| on [0, 1]
  double tolerance = 1e-7;
  bool verdict = false;
  std::string reason;
};

// All node pairs (s, t) with t - s >= min_len.
std::vector<std::pair<int, int>> default_intervals(const DomainGrid& grid, int min_len = 2);
// Deterministic subsample of m intervals from the default set (evenly spaced).
std::vector<std::pair<int, int>> sample_intervals(const DomainGrid& grid, int m);

FirstConditionReport check_first_condition(const PathMeasure& eta, const PressureField& q, double tol = 1e-7);
SecondConditionReport check_second_condition(const PathMeasure& eta, const PressureField& q,
                                             const std::vector<std::pair<int, int>>& intervals,
                                             double tol = 1e-7);

// Optional expected endpoint plans: pass empty plans to skip the endpoint comparison.
CertificateReport certify(const PathMeasure& eta, const PressureField& q, double tol = 1e-7,
                          const std::vector<std::pair<int, int>>* intervals = nullptr,
                          const TransportPlan* expect_eta = nullptr, const TransportPlan* expect_gamma = nullptr);

// Psi(q) = sum_a n^{-d} W_{c^{0,1}_q}(eta_a, gamma_a) + dt n^{-d} sum_{k,x} q_k(x)
double psi_functional(const DomainGrid& grid, const PressureField& q, const TransportPlan& eta_plan,
                      const TransportPlan& gamma_plan);

}  // namespace geoflow
