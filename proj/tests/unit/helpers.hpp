#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "dense_lp.hpp"
#include "geoflow/flow.hpp"

namespace testutil {

using namespace geoflow;

// every label moves `shift` cells per step along axis 0
inline PathMeasure translation_flow(const DomainGrid& g, int shift) {
  PathMeasure eta;
  eta.grid = g;
  for (int a = 0; a < g.num_cells(); ++a) {
    GridPath p;
    p.label = a;
    p.weight = g.cell_mass();
    for (int k = 0; k <= g.K; ++k) {
      auto c = g.coords(a);
      c[0] = ((c[0] + k * shift) % g.n + g.n) % g.n;
      p.nodes.push_back(g.index(c));
    }
    eta.paths.push_back(p);
  }
  return eta;
}

inline PathMeasure constant_flow(const DomainGrid& g) { return translation_flow(g, 0); }

inline std::vector<int> random_perm(int N, std::mt19937_64& rng) {
  std::vector<int> p(N);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

// convex combination of `terms` random permutation plans
inline TransportPlan random_plan(int N, std::mt19937_64& rng, int terms = 2) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> w(terms);
  double s = 0.0;
  for (auto& x : w) s += (x = u(rng));
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N, N);
  for (int t = 0; t < terms; ++t) m += plan_of_map(random_perm(N, rng)).m * (w[t] / s);
  return TransportPlan(m);
}

// all node sequences of length K+1 with steps under the cap, by plain recursion
inline void all_sequences(const DomainGrid& g, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == g.K + 1) {
    out.push_back(cur);
    return;
  }
  for (int y = 0; y < g.num_cells(); ++y) {
    if (!cur.empty()) {
      auto o = g.displacement(cur.back(), y);
      if (std::abs(o[0]) > g.cap || std::abs(o[1]) > g.cap) continue;
    }
    cur.push_back(y);
    all_sequences(g, cur, out);
    cur.pop_back();
  }
}

inline std::vector<std::vector<int>> all_sequences(const DomainGrid& g) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  all_sequences(g, cur, out);
  return out;
}

// random path measure: each label gets a few random admissible paths
inline PathMeasure random_measure(const DomainGrid& g, std::mt19937_64& rng, int per_label = 2) {
  auto seqs = all_sequences(g);
  PathMeasure eta;
  eta.grid = g;
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int a = 0; a < g.num_cells(); ++a) {
    std::vector<double> w(per_label);
    double s = 0.0;
    for (auto& x : w) s += (x = u(rng));
    for (int j = 0; j < per_label; ++j) {
      std::uniform_int_distribution<size_t> pick(0, seqs.size() - 1);
      eta.paths.push_back({a, seqs[pick(rng)], w[j] / s * g.cell_mass()});
    }
  }
  return eta;
}

// Geodesic LP over every admissible labeled path (no support pruning), dense tableau.
inline DenseLPResult brute_force_geodesic(const DomainGrid& g, const TransportPlan& eta, const TransportPlan& gamma,
                                          std::vector<GridPath>* paths_out = nullptr) {
  int N = g.num_cells();
  auto seqs = all_sequences(g);
  std::vector<GridPath> paths;
  for (int a = 0; a < N; ++a)
    for (const auto& s : seqs) paths.push_back({a, s, 0.0});
  int rows = 2 * N * N + (g.K - 1) * N;
  std::vector<std::vector<double>> A(rows, std::vector<double>(paths.size(), 0.0));
  std::vector<double> b(rows), c(paths.size());
  for (int a = 0; a < N; ++a)
    for (int x = 0; x < N; ++x) {
      b[a * N + x] = eta.m(a, x);
      b[N * N + a * N + x] = gamma.m(a, x);
    }
  for (int r = 2 * N * N; r < rows; ++r) b[r] = 1.0 / N;
  for (size_t j = 0; j < paths.size(); ++j) {
    const auto& p = paths[j];
    A[p.label * N + p.nodes.front()][j] = 1.0;
    A[N * N + p.label * N + p.nodes.back()][j] = 1.0;
    for (int k = 1; k < g.K; ++k) A[2 * N * N + (k - 1) * N + p.nodes[k]][j] = 1.0;
    c[j] = path_action(g, p.nodes);
  }
  auto res = dense_lp_min(A, b, c);
  if (paths_out) {
    paths_out->clear();
    for (size_t j = 0; j < paths.size() && res.feasible; ++j)
      if (res.x[j] > 1e-14) paths_out->push_back({paths[j].label, paths[j].nodes, res.x[j]});
  }
  return res;
}

}  // namespace testutil
