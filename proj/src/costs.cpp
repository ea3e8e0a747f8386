#include "geoflow/costs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "geoflow/lp.hpp"
#include "geoflow/parallel.hpp"

namespace geoflow {

double running_cost(const DomainGrid& grid, const PressureField& q, int k, int x) {
  if (k <= 0 || k >= grid.K || q.p.rows() == 0) return 0.0;
  return -q.at(k, x) * grid.dt();
}

double lagrangian_cost(const DomainGrid& grid, const PressureField& q, const std::vector<int>& nodes, int s) {
  double L = 0.0;
  for (size_t i = 0; i + 1 < nodes.size(); ++i) {
    L += grid.dist2(nodes[i], nodes[i + 1]) / (2.0 * grid.dt());
    L += running_cost(grid, q, s + static_cast<int>(i) + 1, nodes[i + 1]);
  }
  return L;
}

static void check_q(const DomainGrid& grid, const PressureField& q) {
  if (q.p.rows() == 0) return;
  if (q.interior_slices() != grid.K - 1 || q.p.cols() != grid.num_cells())
    throw std::invalid_argument("pressure field does not match the grid");
}

CostMatrix dp_cost(const DomainGrid& grid, const PressureField& q, int s, int t) {
  if (s < 0 || t > grid.K || s >= t) throw std::invalid_argument("dp_cost needs 0 <= s < t <= K");
  check_q(grid, q);
  int N = grid.num_cells();
  int L = t - s;
  std::vector<std::vector<int>> nbrs(N);
  for (int x = 0; x < N; ++x) nbrs[x] = grid.neighbors(x);

  CostMatrix out;
  out.s = s;
  out.t = t;
  out.c = Eigen::MatrixXd::Zero(N, N);
  out.finite.resize(N, N);
  out.finite.setConstant(false);
  out.argmin.assign(static_cast<size_t>(N) * N, {});
  const double inf = std::numeric_limits<double>::infinity();

  parallel_for(N, [&](int y) {
    // V[i][x]: optimal cost from (s+i, x) to (t, y)
    std::vector<std::vector<double>> V(L + 1, std::vector<double>(N, inf));
    V[L][y] = 0.0;
    for (int i = L - 1; i >= 0; --i) {
      int k = s + i;
      for (int x = 0; x < N; ++x) {
        double best = inf;
        for (int z : nbrs[x]) {
          if (V[i + 1][z] == inf) continue;
          double v = grid.dist2(x, z) / (2.0 * grid.dt()) + running_cost(grid, q, k + 1, z) + V[i + 1][z];
          if (v < best) best = v;
        }
        V[i][x] = best;
      }
    }
    for (int x = 0; x < N; ++x) {
      if (V[0][x] == inf) continue;
      out.c(x, y) = V[0][x];
      out.finite(x, y) = true;
      // greedy forward pass picks the lexicographically smallest optimal continuation
      std::vector<int> path{x};
      int cur = x;
      for (int i = 0; i < L; ++i) {
        int k = s + i;
        int pick = -1;
        for (int z : nbrs[cur]) {
          if (V[i + 1][z] == inf) continue;
          double v = grid.dist2(cur, z) / (2.0 * grid.dt()) + running_cost(grid, q, k + 1, z) + V[i + 1][z];
          if (v <= V[i][cur] + 1e-12 * (1.0 + std::abs(V[i][cur]))) {
            pick = z;
            break;
          }
        }
        path.push_back(pick);
        cur = pick;
      }
      out.argmin[static_cast<size_t>(x) * N + y] = std::move(path);
    }
  });
  return out;
}

MinimalityResult is_q_minimizing(const DomainGrid& grid, const std::vector<int>& nodes, const PressureField& q,
                                 int s, int t, double tol) {
  if (static_cast<int>(nodes.size()) != grid.K + 1) throw std::invalid_argument("path length must be K+1");
  CostMatrix c = dp_cost(grid, q, s, t);
  std::vector<int> seg(nodes.begin() + s, nodes.begin() + t + 1);
  MinimalityResult r;
  r.gap = lagrangian_cost(grid, q, seg, s) - c.c(nodes[s], nodes[t]);
  r.verdict = r.gap <= tol;
  r.worst_s = s;
  r.worst_t = t;
  return r;
}

MinimalityResult is_locally_q_minimizing(const DomainGrid& grid, const std::vector<int>& nodes,
                                         const PressureField& q, double tol) {
  MinimalityResult worst;
  worst.gap = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < grid.K; ++s) {
    for (int t = s + 1; t <= grid.K; ++t) {
      auto r = is_q_minimizing(grid, nodes, q, s, t, tol);
      if (r.gap > worst.gap) worst = r;
    }
  }
  worst.verdict = worst.gap <= tol;
  return worst;
}

OTResult ot_value(const CostMatrix& cost, const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2) {
  int N = cost.size();
  Eigen::MatrixXd c = cost.c;
  for (int x = 0; x < N; ++x)
    for (int y = 0; y < N; ++y)
      if (!cost.finite(x, y)) c(x, y) = std::numeric_limits<double>::infinity();
  return ot_value(c, mu1, mu2);
}

OTResult ot_value(const Eigen::MatrixXd& cost, const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2) {
  int N1 = static_cast<int>(cost.rows()), N2 = static_cast<int>(cost.cols());
  if (mu1.size() != N1 || mu2.size() != N2) throw std::invalid_argument("ot_value: marginal size mismatch");
  if ((mu1.array() < 0).any() || (mu2.array() < 0).any()) throw std::invalid_argument("ot_value: negative mass");
  if (std::abs(mu1.sum() - mu2.sum()) > 1e-12 * std::max(1.0, mu1.sum()))
    throw std::invalid_argument("ot_value: marginals have different mass");
  std::vector<int> rows1, rows2;
  std::vector<int> id1(N1, -1), id2(N2, -1);
  LinearProgram lp;
  for (int x = 0; x < N1; ++x)
    if (mu1(x) > 0) {
      id1[x] = lp.num_rows++;
      lp.b.push_back(mu1(x));
      rows1.push_back(x);
    }
  for (int y = 0; y < N2; ++y)
    if (mu2(y) > 0) {
      id2[y] = lp.num_rows++;
      lp.b.push_back(mu2(y));
      rows2.push_back(y);
    }
  std::vector<std::pair<int, int>> pairs;
  for (int x : rows1)
    for (int y : rows2) {
      if (!std::isfinite(cost(x, y))) continue;
      pairs.push_back({x, y});
      SparseColumn col;
      col.rows = {id1[x], id2[y]};
      col.vals = {1.0, 1.0};
      lp.columns.push_back(col);
      lp.cost.push_back(cost(x, y));
    }
  OTResult out;
  out.plan = Eigen::MatrixXd::Zero(N1, N2);
  out.u = Eigen::VectorXd::Zero(N1);
  out.v = Eigen::VectorXd::Zero(N2);
  if (lp.columns.empty()) return out;
  LPResult res = solve_lp(lp);
  if (res.status != LPStatus::Optimal) return out;
  out.feasible = true;
  out.value = res.objective;
  for (size_t j = 0; j < pairs.size(); ++j) out.plan(pairs[j].first, pairs[j].second) = res.x[j];
  for (int x : rows1) out.u(x) = res.y[id1[x]];
  for (int y : rows2) out.v(y) = res.y[id2[y]];
  out.dual_value = out.u.dot(mu1) + out.v.dot(mu2);
  double viol = 0.0;
  for (int x : rows1)
    for (int y : rows2) {
      if (!std::isfinite(cost(x, y))) continue;
      viol = std::max(viol, out.u(x) + out.v(y) - cost(x, y));
    }
  out.max_dual_violation = viol;
  return out;
}

double plan_w2_squared(const DomainGrid& grid, const TransportPlan& a, const TransportPlan& b) {
  int N = grid.num_cells();
  std::vector<std::pair<int, int>> sa, sb;
  std::vector<double> wa, wb;
  for (int x = 0; x < N; ++x)
    for (int y = 0; y < N; ++y) {
      if (a.m(x, y) > 0) {
        sa.push_back({x, y});
        wa.push_back(a.m(x, y));
      }
      if (b.m(x, y) > 0) {
        sb.push_back({x, y});
        wb.push_back(b.m(x, y));
      }
    }
  Eigen::MatrixXd c(sa.size(), sb.size());
  for (size_t i = 0; i < sa.size(); ++i)
    for (size_t j = 0; j < sb.size(); ++j)
      c(i, j) = 0.5 * grid.dist2(sa[i].first, sb[j].first) + 0.5 * grid.dist2(sa[i].second, sb[j].second);
  Eigen::VectorXd m1 = Eigen::Map<Eigen::VectorXd>(wa.data(), wa.size());
  Eigen::VectorXd m2 = Eigen::Map<Eigen::VectorXd>(wb.data(), wb.size());
  // normalize tiny drift so the LP sees equal masses
  m2 *= m1.sum() / m2.sum();
  auto r = ot_value(c, m1, m2);
  if (!r.feasible) throw std::runtime_error("plan_w2_squared: transport LP failed");
  return r.value;
}

namespace {

// Rounded straight lattice leg from w to z over L steps; cells on nodes 0..L.
std::vector<int> straight_leg(const DomainGrid& grid, int w, int z, int L) {
  Offset a = grid.coords(w);
  Offset del = grid.displacement(w, z);
  std::vector<int> out;
  for (int j = 0; j <= L; ++j) {
    Offset c{0, 0};
    for (int ax = 0; ax < grid.d; ++ax) {
      double pos = a[ax] + static_cast<double>(del[ax]) * j / L;
      int ip = static_cast<int>(std::floor(pos + 0.5));
      if (grid.geometry == Geometry::Torus) ip = ((ip % grid.n) + grid.n) % grid.n;
      c[ax] = ip;
    }
    out.push_back(grid.index(c));
  }
  return out;
}

double leg_kinetic(const DomainGrid& grid, const std::vector<int>& leg) {
  double e = 0.0;
  for (size_t i = 0; i + 1 < leg.size(); ++i) {
    if (!grid.step_allowed(leg[i], leg[i + 1]))
      throw std::invalid_argument("k_bound: velocity cap too small for the two-leg construction");
    e += grid.dist2(leg[i], leg[i + 1]) / (2.0 * grid.dt());
  }
  return e;
}

}  // namespace

std::vector<double> k_bound(const DomainGrid& grid, const PressureField& q, int s, int t) {
  if (s < 0 || t > grid.K || s >= t) throw std::invalid_argument("k_bound needs 0 <= s < t <= K");
  check_q(grid, q);
  int N = grid.num_cells();
  PressureField Mq = q.p.rows() == 0 ? PressureField(grid.K, N) : maximal_function(grid, q);
  int L1 = (t - s) / 2;
  int L2 = (t - s) - L1;
  double l = 0.5 * (t - s) * grid.dt();
  auto mq_along = [&](const std::vector<int>& leg, int k0) {
    double acc = 0.0;
    for (size_t i = 1; i < leg.size(); ++i) {
      int k = k0 + static_cast<int>(i);
      if (k >= 1 && k < grid.K && Mq.p.rows() > 0) acc += Mq.at(k, leg[i]) * grid.dt();
    }
    return acc;
  };
  double kin1 = 0.0, kin2 = 0.0;
  std::vector<double> out_leg(N, 0.0), in_leg(N, 0.0);
  for (int w = 0; w < N; ++w) {
    for (int z = 0; z < N; ++z) {
      if (L1 > 0) {
        auto leg1 = straight_leg(grid, w, z, L1);
        kin1 = std::max(kin1, leg_kinetic(grid, leg1));
        out_leg[w] += mq_along(leg1, s) / N;
      } else if (z != w) {
        throw std::invalid_argument("k_bound: interval too short for the two-leg construction");
      }
      auto leg2 = straight_leg(grid, z, w, L2);
      kin2 = std::max(kin2, leg_kinetic(grid, leg2));
      in_leg[w] += mq_along(leg2, s + L1) / N;
    }
  }
  double kin = std::max(grid.d / (4.0 * l), 0.5 * (kin1 + kin2));
  std::vector<double> K(N);
  for (int w = 0; w < N; ++w) K[w] = kin + out_leg[w] + in_leg[w];
  return K;
}

namespace {

// Symmetric smoothing matrix along one axis (periodic images on the torus, mirror images on the cube).
Eigen::MatrixXd axis_kernel(int n, double eps, Geometry geom) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
  int images = static_cast<int>(std::ceil(8.0 * eps)) + 2;
  auto g = [&](double r) { return std::exp(-r * r / (2.0 * eps * eps)); };
  for (int i = 0; i < n; ++i) {
    double xi = (i + 0.5) / n;
    for (int j = 0; j < n; ++j) {
      double xj = (j + 0.5) / n;
      double acc = 0.0;
      for (int m = -images; m <= images; ++m) {
        if (geom == Geometry::Torus) {
          acc += g(xj - xi + m);
        } else {
          acc += g(xj - xi + 2.0 * m) + g(-xj - xi + 2.0 * m);
        }
      }
      S(i, j) = acc;
    }
  }
  // every row sums to the same lattice sum, so a common factor keeps S symmetric
  double total = 0.0;
  for (int m = -images * n * 2; m <= images * n * 2; ++m) total += g(static_cast<double>(m) / n);
  return S / total;
}

}  // namespace

PressureField smooth_pressure(const DomainGrid& grid, const PressureField& p, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("smoothing scale must be > 0");
  int n = grid.n;
  Eigen::MatrixXd S = axis_kernel(n, eps, grid.geometry);
  PressureField out = p;
  for (int r = 0; r < p.p.rows(); ++r) {
    if (grid.d == 1) {
      out.p.row(r) = (S * p.p.row(r).transpose()).transpose();
    } else {
      // slice stored as i0 + n*i1: reshape to n x n with i0 as row index
      Eigen::MatrixXd f = Eigen::Map<const Eigen::MatrixXd>(p.p.row(r).eval().data(), n, n);
      Eigen::MatrixXd g = S * f * S.transpose();
      out.p.row(r) = Eigen::Map<Eigen::RowVectorXd>(g.data(), n * n);
    }
  }
  return out;
}

std::vector<double> dyadic_schedule(const DomainGrid& grid) {
  int J = static_cast<int>(std::ceil(std::log2(static_cast<double>(grid.n)))) + 2;
  std::vector<double> e;
  for (int j = 0; j <= J; ++j) e.push_back(std::ldexp(1.0, -j));
  return e;
}

PressureField maximal_function(const DomainGrid& grid, const PressureField& p) {
  PressureField absp = p;
  absp.p = p.p.cwiseAbs();
  PressureField out = absp;
  for (double e : dyadic_schedule(grid)) {
    PressureField s = smooth_pressure(grid, absp, e);
    out.p = out.p.cwiseMax(s.p);
  }
  return out;
}

PressureField precise_representative(const DomainGrid& grid, const PressureField& p,
                                     const std::vector<double>& schedule) {
  if (schedule.empty()) return p;
  std::vector<double> sch = schedule;
  std::sort(sch.begin(), sch.end(), std::greater<double>());
  // liminf over a finite decreasing schedule: infimum over its finer half
  size_t from = sch.size() / 2;
  PressureField out = smooth_pressure(grid, p, sch[from]);
  for (size_t i = from + 1; i < sch.size(); ++i) out.p = out.p.cwiseMin(smooth_pressure(grid, p, sch[i]).p);
  return out;
}

}  // namespace geoflow
