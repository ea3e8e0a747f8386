#include "geoflow/certificates.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace geoflow {

std::vector<std::pair<int, int>> default_intervals(const DomainGrid& grid, int min_len) {
  std::vector<std::pair<int, int>> out;
  for (int s = 0; s <= grid.K; ++s)
    for (int t = s + min_len; t <= grid.K; ++t) out.push_back({s, t});
  return out;
}

std::vector<std::pair<int, int>> sample_intervals(const DomainGrid& grid, int m) {
  auto all = default_intervals(grid);
  if (m <= 0 || m >= static_cast<int>(all.size())) return all;
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < m; ++i) out.push_back(all[static_cast<size_t>(i) * all.size() / m]);
  return out;
}

namespace {

// cost matrices for every (s, t), built lazily
class CostCache {
 public:
  CostCache(const DomainGrid& g, const PressureField& q) : grid_(g), q_(q) {}
  const CostMatrix& get(int s, int t) {
    auto key = std::make_pair(s, t);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, dp_cost(grid_, q_, s, t)).first;
    return it->second;
  }

 private:
  const DomainGrid& grid_;
  const PressureField& q_;
  std::map<std::pair<int, int>, CostMatrix> cache_;
};

}  // namespace

FirstConditionReport check_first_condition(const PathMeasure& eta, const PressureField& q, double tol) {
  (void)tol;
  const auto& grid = eta.grid;
  CostCache cache(grid, q);
  FirstConditionReport rep;
  rep.max_gap = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < eta.paths.size(); ++i) {
    const auto& p = eta.paths[i];
    if (p.weight <= 0.0) continue;
    for (int s = 0; s < grid.K; ++s)
      for (int t = s + 1; t <= grid.K; ++t) {
        const auto& c = cache.get(s, t);
        std::vector<int> seg(p.nodes.begin() + s, p.nodes.begin() + t + 1);
        double gap = lagrangian_cost(grid, q, seg, s) - c.c(p.nodes[s], p.nodes[t]);
        if (gap > rep.max_gap) {
          rep.max_gap = gap;
          rep.worst_path = static_cast<int>(i);
          rep.worst_s = s;
          rep.worst_t = t;
        }
        if (s == 0 && t == grid.K) rep.weighted_gap += p.weight * gap;
      }
  }
  if (rep.worst_path < 0) rep.max_gap = 0.0;
  return rep;
}

SecondConditionReport check_second_condition(const PathMeasure& eta, const PressureField& q,
                                             const std::vector<std::pair<int, int>>& intervals, double tol) {
  (void)tol;
  const auto& grid = eta.grid;
  int N = grid.num_cells();
  CostCache cache(grid, q);
  SecondConditionReport rep;
  auto lm = eta.label_mass();
  for (auto [s, t] : intervals) {
    auto plans = endpoint_plans_per_label(eta, s, t);
    const auto& c = cache.get(s, t);
    ++rep.intervals_checked;
    for (const auto& lp : plans) {
      Eigen::VectorXd mu1 = Eigen::VectorXd::Zero(N), mu2 = Eigen::VectorXd::Zero(N);
      double cost = 0.0;
      bool finite = true;
      for (const auto& [xy, w] : lp.entries) {
        mu1(xy.first) += w;
        mu2(xy.second) += w;
        if (!c.is_finite(xy.first, xy.second)) finite = false;
        else cost += w * c.c(xy.first, xy.second);
      }
      if (!finite) throw std::runtime_error("second condition: plan charges an unreachable pair");
      int s1 = static_cast<int>((mu1.array() > 0).count());
      int s2 = static_cast<int>((mu2.array() > 0).count());
      double gap = 0.0;
      // a Dirac marginal leaves only the product coupling
      if (s1 > 1 && s2 > 1) {
        auto ot = ot_value(c, mu1, mu2);
        if (!ot.feasible) throw std::runtime_error("second condition: transport problem infeasible");
        gap = cost - ot.value;
      }
      if (rep.worst_label < 0 || gap > rep.max_gap) {
        rep.max_gap = std::max(rep.max_gap, gap);
        rep.worst_label = lp.label;
        rep.worst_s = s;
        rep.worst_t = t;
      }
      if (s == 0 && t == grid.K) rep.weighted_gap += lm[lp.label] * gap;
    }
  }
  return rep;
}

CertificateReport certify(const PathMeasure& eta, const PressureField& q, double tol,
                          const std::vector<std::pair<int, int>>* intervals, const TransportPlan* expect_eta,
                          const TransportPlan* expect_gamma) {
  const auto& grid = eta.grid;
  double res = incompressibility_residual(eta);
  if (res > std::max(tol, 1e-9)) throw std::invalid_argument("certify: flow is not incompressible (residual " + std::to_string(res) + ")");
  if (expect_eta && (label_plan(eta, 0).m - expect_eta->m).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("certify: initial plan mismatch");
  if (expect_gamma && (label_plan(eta, grid.K).m - expect_gamma->m).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("certify: final plan mismatch");

  CertificateReport rep;
  rep.tolerance = tol;
  rep.first = check_first_condition(eta, q, tol);
  auto iv = intervals ? *intervals : default_intervals(grid);
  rep.second = check_second_condition(eta, q, iv, tol);

  // identity check on [0, 1]
  double lq = 0.0;
  for (const auto& p : eta.paths) lq += p.weight * lagrangian_cost(grid, q, p.nodes, 0);
  double wsum = psi_functional(grid, q, label_plan(eta, 0), label_plan(eta, grid.K));
  double qint = 0.0;
  for (int k = 1; k < grid.K && q.p.rows() > 0; ++k) qint += q.p.row(k - 1).sum() * grid.cell_mass() * grid.dt();
  rep.identity_residual = std::abs(lq - (wsum - qint));

  rep.verdict = rep.first.max_gap <= tol && rep.second.max_gap <= tol && rep.identity_residual <= tol;
  if (!rep.verdict) {
    if (rep.first.max_gap > tol)
      rep.reason = "path " + std::to_string(rep.first.worst_path) + " is not q-minimizing on [" +
                   std::to_string(rep.first.worst_s) + "," + std::to_string(rep.first.worst_t) + "]";
    else if (rep.second.max_gap > tol)
      rep.reason = "label " + std::to_string(rep.second.worst_label) + " plan is not c-optimal on [" +
                   std::to_string(rep.second.worst_s) + "," + std::to_string(rep.second.worst_t) + "]";
    else
      rep.reason = "identity residual above tolerance";
  }
  return rep;
}

double psi_functional(const DomainGrid& grid, const PressureField& q, const TransportPlan& eta_plan,
                      const TransportPlan& gamma_plan) {
  int N = grid.num_cells();
  CostMatrix c = dp_cost(grid, q, 0, grid.K);
  double total = 0.0;
  for (int a = 0; a < N; ++a) {
    double mass = eta_plan.m.row(a).sum();
    if (mass <= 0.0) continue;
    Eigen::VectorXd mu1 = eta_plan.m.row(a).transpose() / mass;
    Eigen::VectorXd mu2 = gamma_plan.m.row(a).transpose() / gamma_plan.m.row(a).sum();
    double w = 0.0;
    int s1 = static_cast<int>((mu1.array() > 0).count());
    int s2 = static_cast<int>((mu2.array() > 0).count());
    if (s1 == 1 || s2 == 1) {
      for (int x = 0; x < N; ++x)
        for (int y = 0; y < N; ++y) {
          double m = mu1(x) * mu2(y);
          if (m <= 0.0) continue;
          if (!c.is_finite(x, y)) return std::numeric_limits<double>::infinity();
          w += m * c.c(x, y);
        }
    } else {
      auto ot = ot_value(c, mu1, mu2);
      if (!ot.feasible) return std::numeric_limits<double>::infinity();
      w = ot.value;
    }
    total += mass * w;
  }
  for (int k = 1; k < grid.K && q.p.rows() > 0; ++k) total += q.p.row(k - 1).sum() * grid.cell_mass() * grid.dt();
  return total;
}

}  // namespace geoflow
