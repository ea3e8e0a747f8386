#include "geoflow/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "geoflow/lp.hpp"

namespace geoflow {

std::string to_string(Backend b) { return b == Backend::Exact ? "exact" : "entropic"; }

Backend backend_from_string(const std::string& s) {
  if (s == "exact" || s == "lp") return Backend::Exact;
  if (s == "entropic") return Backend::Entropic;
  throw std::invalid_argument("unknown backend '" + s + "'");
}

void GeodesicProblem::validate() const {
  grid.validate();
  int N = grid.num_cells();
  if (eta.size() != N || gamma.size() != N) throw std::invalid_argument("plan size does not match grid");
  eta.validate();
  gamma.validate();
  if (backend == Backend::Entropic && !(epsilon > 0.0)) throw std::invalid_argument("entropic epsilon must be > 0");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
}

std::vector<int> PathSet::path(std::int64_t i) const {
  int L = grid.K + 1;
  return std::vector<int>(nodes.begin() + i * L, nodes.begin() + (i + 1) * L);
}

namespace {

// Depth-first enumeration in lexicographic node order.
// allowed_end marks admissible terminal cells; reach[k][x] prunes dead branches.
void enumerate_from(const DomainGrid& grid, const std::vector<std::vector<int>>& nbrs, int label, int start,
                    const std::vector<char>& allowed_end, PathSet& out, std::int64_t budget) {
  int K = grid.K;
  int N = grid.num_cells();
  // steps-to-go feasibility: can reach an allowed end from x in r steps
  std::vector<std::vector<char>> ok(K + 1, std::vector<char>(N, 0));
  for (int x = 0; x < N; ++x) ok[0][x] = allowed_end[x];
  for (int r = 1; r <= K; ++r)
    for (int x = 0; x < N; ++x)
      for (int y : nbrs[x])
        if (ok[r - 1][y]) {
          ok[r][x] = 1;
          break;
        }
  if (!ok[K][start]) return;
  std::vector<int> cur(K + 1);
  std::vector<size_t> it(K + 1, 0);
  cur[0] = start;
  int depth = 0;
  while (depth >= 0) {
    if (depth == K) {
      if (out.size() >= budget) throw std::runtime_error("path budget exceeded; use the entropic backend or a smaller grid");
      out.labels.push_back(label);
      out.nodes.insert(out.nodes.end(), cur.begin(), cur.end());
      --depth;
      continue;
    }
    const auto& nb = nbrs[cur[depth]];
    size_t& i = it[depth];
    while (i < nb.size() && !ok[K - depth - 1][nb[i]]) ++i;
    if (i == nb.size()) {
      i = 0;
      --depth;
      continue;
    }
    cur[depth + 1] = nb[i];
    ++i;
    ++depth;
    it[depth] = 0;
  }
}

std::vector<std::vector<int>> neighbor_lists(const DomainGrid& grid) {
  std::vector<std::vector<int>> nb(grid.num_cells());
  for (int x = 0; x < grid.num_cells(); ++x) nb[x] = grid.neighbors(x);
  return nb;
}

bool plans_equal(const TransportPlan& a, const TransportPlan& b) {
  return a.size() == b.size() && (a.m - b.m).cwiseAbs().maxCoeff() <= 1e-15;
}

GeodesicSolution constant_solution(const GeodesicProblem& prob) {
  GeodesicSolution sol;
  sol.flow.grid = prob.grid;
  int N = prob.grid.num_cells();
  for (int a = 0; a < N; ++a)
    for (int x = 0; x < N; ++x)
      if (prob.eta.m(a, x) > 0.0)
        sol.flow.paths.push_back(GridPath{a, std::vector<int>(prob.grid.K + 1, x), prob.eta.m(a, x)});
  sol.value = 0.0;
  sol.pressure = PressureField(prob.grid.K, N);
  sol.diag.backend = to_string(prob.backend);
  sol.diag.short_circuit = true;
  sol.diag.num_paths = static_cast<std::int64_t>(sol.flow.paths.size());
  sol.start_dual = Eigen::MatrixXd::Zero(N, N);
  sol.end_dual = Eigen::MatrixXd::Zero(N, N);
  return sol;
}

// The pressure rows are usually dual degenerate. Walk from the simplex dual toward the
// least-norm pressure on the optimal dual face (active-set projection + ratio test).
void select_min_norm_dual(const LinearProgram& lp, const std::vector<double>& x, std::vector<double>& y,
                          int interior0, int max_rounds = 200) {
  const int R = lp.num_rows;
  const int P = static_cast<int>(lp.columns.size());
  if (interior0 >= R) return;
  auto reduced = [&](int j, const Eigen::VectorXd& v) {
    double r = lp.cost[j];
    const auto& col = lp.columns[j];
    for (size_t t = 0; t < col.rows.size(); ++t) r -= v(col.rows[t]) * col.vals[t];
    return r;
  };
  Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), R);
  std::vector<int> active;
  std::vector<char> in_active(P, 0);
  for (int j = 0; j < P; ++j)
    if (x[j] > 1e-12) {
      active.push_back(j);
      in_active[j] = 1;
    }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(R);
  w.tail(R - interior0).setOnes();
  for (int round = 0; round < max_rounds; ++round) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(active.size()), R);
    for (size_t i = 0; i < active.size(); ++i) {
      const auto& col = lp.columns[active[i]];
      for (size_t t = 0; t < col.rows.size(); ++t) M(i, col.rows[t]) = col.vals[t];
    }
    Eigen::MatrixXd Z;
    if (M.rows() == 0) {
      Z = Eigen::MatrixXd::Identity(R, R);
    } else {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
      lu.setThreshold(1e-10);
      Z = lu.kernel();
      if (lu.rank() == R) return;
    }
    Eigen::MatrixXd PZ = w.asDiagonal() * Z;
    Eigen::VectorXd z = -PZ.completeOrthogonalDecomposition().solve(w.cwiseProduct(yv));
    Eigen::VectorXd delta = Z * z;
    if (w.cwiseProduct(delta).norm() <= 1e-13 * (1.0 + w.cwiseProduct(yv).norm())) return;
    double theta = 1.0;
    std::vector<std::pair<double, int>> block;
    for (int j = 0; j < P; ++j) {
      if (in_active[j]) continue;
      double dr = reduced(j, delta) - lp.cost[j];  // change of the reduced cost per unit step
      if (dr >= -1e-13) continue;
      double tj = std::max(reduced(j, yv), 0.0) / -dr;
      block.push_back({tj, j});
      theta = std::min(theta, tj);
    }
    yv += theta * delta;
    if (theta >= 1.0) break;
    bool added = false;
    for (auto [tj, j] : block)
      if (tj <= theta + 1e-12 && !in_active[j]) {
        active.push_back(j);
        in_active[j] = 1;
        added = true;
      }
    if (!added) break;
  }
  for (int i = 0; i < R; ++i) y[i] = yv(i);
}

// Max-entropy point of the optimal face: iterative proportional fitting restricted to the
// columns with zero reduced cost. groups[g] = [begin, end) row ranges hit at most once per column.
bool central_primal(const LinearProgram& lp, const std::vector<double>& y,
                    const std::vector<std::pair<int, int>>& groups, std::vector<double>& x, double tol,
                    int max_sweeps) {
  const int P = static_cast<int>(lp.columns.size());
  std::vector<int> face;
  for (int j = 0; j < P; ++j) {
    double r = lp.cost[j];
    const auto& col = lp.columns[j];
    for (size_t t = 0; t < col.rows.size(); ++t) r -= y[col.rows[t]] * col.vals[t];
    if (r <= 1e-9) face.push_back(j);
  }
  std::vector<double> lu(lp.num_rows, 0.0), lx(face.size(), 0.0), row_sum(lp.num_rows);
  bool ok = false;
  for (int sweep = 0; sweep < max_sweeps && !ok; ++sweep) {
    for (auto [b0, b1] : groups) {
      std::fill(row_sum.begin() + b0, row_sum.begin() + b1, 0.0);
      for (size_t f = 0; f < face.size(); ++f) {
        const auto& col = lp.columns[face[f]];
        double l = 0.0;
        for (int i : col.rows) l += lu[i];
        lx[f] = std::exp(l);
        for (int i : col.rows)
          if (i >= b0 && i < b1) row_sum[i] += lx[f];
      }
      for (int i = b0; i < b1; ++i)
        if (row_sum[i] > 0.0) lu[i] += std::log(lp.b[i] / row_sum[i]);
    }
    // residual over all rows
    std::fill(row_sum.begin(), row_sum.end(), 0.0);
    for (size_t f = 0; f < face.size(); ++f) {
      const auto& col = lp.columns[face[f]];
      double l = 0.0;
      for (int i : col.rows) l += lu[i];
      lx[f] = std::exp(l);
      for (int i : col.rows) row_sum[i] += lx[f];
    }
    double err = 0.0;
    for (int i = 0; i < lp.num_rows; ++i) err = std::max(err, std::abs(row_sum[i] - lp.b[i]));
    ok = err <= tol;
  }
  if (!ok) return false;
  x.assign(P, 0.0);
  for (size_t f = 0; f < face.size(); ++f) x[face[f]] = lx[f];
  return true;
}

}  // namespace

std::int64_t count_paths(const DomainGrid& grid) {
  auto nb = neighbor_lists(grid);
  int N = grid.num_cells();
  std::vector<double> cnt(N, 1.0);
  for (int k = 0; k < grid.K; ++k) {
    std::vector<double> nxt(N, 0.0);
    for (int x = 0; x < N; ++x)
      for (int y : nb[x]) nxt[x] += cnt[y];
    cnt = nxt;
  }
  double total = 0.0;
  for (double c : cnt) total += c;
  return total > 9e18 ? std::numeric_limits<std::int64_t>::max() : static_cast<std::int64_t>(total);
}

PathSet enumerate_paths(const DomainGrid& grid, std::int64_t budget) {
  grid.validate();
  if (count_paths(grid) > budget)
    throw std::runtime_error("path budget exceeded; use the entropic backend or a smaller grid");
  auto nb = neighbor_lists(grid);
  int N = grid.num_cells();
  PathSet ps;
  ps.grid = grid;
  std::vector<char> all(N, 1);
  for (int a = 0; a < N; ++a) enumerate_from(grid, nb, a, a, all, ps, budget);
  return ps;
}

PathSet enumerate_problem_paths(const GeodesicProblem& prob) {
  const auto& grid = prob.grid;
  auto nb = neighbor_lists(grid);
  int N = grid.num_cells();
  PathSet ps;
  ps.grid = grid;
  for (int a = 0; a < N; ++a) {
    std::vector<char> ends(N, 0);
    for (int y = 0; y < N; ++y) ends[y] = prob.gamma.m(a, y) > 0.0;
    for (int x = 0; x < N; ++x)
      if (prob.eta.m(a, x) > 0.0) enumerate_from(grid, nb, a, x, ends, ps, prob.path_budget);
  }
  return ps;
}

GeodesicSolution solve_exact(const GeodesicProblem& prob) {
  prob.validate();
  if (plans_equal(prob.eta, prob.gamma)) return constant_solution(prob);
  const auto& grid = prob.grid;
  int N = grid.num_cells();
  int K = grid.K;
  double cm = grid.cell_mass();

  PathSet ps = enumerate_problem_paths(prob);

  // rows: start (a,x) for non-Dirac eta_a, end (a,y), interior (k,x)
  Eigen::MatrixXi start_row = Eigen::MatrixXi::Constant(N, N, -1);
  Eigen::MatrixXi end_row = Eigen::MatrixXi::Constant(N, N, -1);
  LinearProgram lp;
  std::vector<char> is_start_row;
  int r = 0;
  for (int a = 0; a < N; ++a) {
    int support = 0;
    for (int x = 0; x < N; ++x) support += prob.eta.m(a, x) > 0.0;
    if (support <= 1) continue;
    for (int x = 0; x < N; ++x)
      if (prob.eta.m(a, x) > 0.0) {
        start_row(a, x) = r++;
        is_start_row.push_back(1);
        lp.b.push_back(prob.eta.m(a, x));
      }
  }
  for (int a = 0; a < N; ++a)
    for (int y = 0; y < N; ++y)
      if (prob.gamma.m(a, y) > 0.0) {
        end_row(a, y) = r++;
        lp.b.push_back(prob.gamma.m(a, y));
      }
  int interior0 = r;
  for (int k = 1; k < K; ++k)
    for (int x = 0; x < N; ++x) {
      lp.b.push_back(cm);
      ++r;
    }
  lp.num_rows = r;
  auto interior_row = [&](int k, int x) { return interior0 + (k - 1) * N + x; };

  std::int64_t P = ps.size();
  lp.columns.resize(P);
  lp.cost.resize(P);
  for (std::int64_t j = 0; j < P; ++j) {
    auto nodes = ps.path(j);
    int a = ps.labels[j];
    auto& col = lp.columns[j];
    if (start_row(a, nodes[0]) >= 0) {
      col.rows.push_back(start_row(a, nodes[0]));
      col.vals.push_back(1.0);
    }
    col.rows.push_back(end_row(a, nodes[K]));
    col.vals.push_back(1.0);
    for (int k = 1; k < K; ++k) {
      col.rows.push_back(interior_row(k, nodes[k]));
      col.vals.push_back(1.0);
    }
    lp.cost[j] = path_action(grid, nodes);
  }

  LPOptions opt;
  opt.max_iterations = std::max(prob.max_iter, 1000);
  LPResult res = solve_lp(lp, opt);
  if (res.status == LPStatus::Infeasible)
    throw std::runtime_error("problem infeasible: endpoint plans cannot be connected under the velocity cap");
  if (res.status != LPStatus::Optimal) throw std::runtime_error("LP iteration limit reached");

  select_min_norm_dual(lp, res.x, res.y, interior0);
  bool central = false;
  if (prob.central) {
    std::vector<std::pair<int, int>> groups;
    int nstart = static_cast<int>(is_start_row.size());
    if (nstart > 0) groups.push_back({0, nstart});
    groups.push_back({nstart, interior0});
    for (int k = 1; k < K; ++k) groups.push_back({interior0 + (k - 1) * N, interior0 + k * N});
    std::vector<double> xc;
    central = central_primal(lp, res.y, groups, xc, 1e-13, 200000);
    if (!central) throw std::runtime_error("central optimum: proportional fitting did not converge");
    res.x = xc;
  }

  GeodesicSolution sol;
  sol.flow.grid = grid;
  for (std::int64_t j = 0; j < P; ++j)
    if (res.x[j] > 1e-15) sol.flow.paths.push_back(GridPath{ps.labels[j], ps.path(j), res.x[j]});
  sol.value = res.objective;
  sol.pressure = PressureField(K, N);
  for (int k = 1; k < K; ++k)
    for (int x = 0; x < N; ++x) sol.pressure.at(k, x) = res.y[interior_row(k, x)] / grid.dt();
  sol.pressure.normalize_mean_zero();

  sol.start_dual = Eigen::MatrixXd::Zero(N, N);
  sol.end_dual = Eigen::MatrixXd::Zero(N, N);
  for (int a = 0; a < N; ++a)
    for (int x = 0; x < N; ++x) {
      if (start_row(a, x) >= 0) sol.start_dual(a, x) = res.y[start_row(a, x)];
      if (end_row(a, x) >= 0) sol.end_dual(a, x) = res.y[end_row(a, x)];
    }

  double dual_inf = 0.0, cs = 0.0;
  for (std::int64_t j = 0; j < P; ++j) {
    double red = lp.cost[j];
    const auto& col = lp.columns[j];
    for (size_t t = 0; t < col.rows.size(); ++t) red -= res.y[col.rows[t]] * col.vals[t];
    dual_inf = std::max(dual_inf, -red);
    if (res.x[j] > 1e-12) cs = std::max(cs, std::abs(red));
  }
  sol.diag.backend = "exact";
  sol.diag.iterations = res.iterations;
  sol.diag.primal_value = res.objective;
  double dual_obj = 0.0;
  for (int i = 0; i < lp.num_rows; ++i) dual_obj += lp.b[i] * res.y[i];
  sol.diag.dual_value = dual_obj;
  sol.diag.gap = std::abs(res.objective - dual_obj);
  sol.diag.marginal_error = incompressibility_residual(sol.flow);
  sol.diag.dual_infeasibility = dual_inf;
  sol.diag.complementary_slackness = cs;
  sol.diag.num_paths = P;
  sol.diag.num_rows = lp.num_rows;
  return sol;
}

namespace {

double lse_add(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

struct EntropicState {
  const GeodesicProblem& prob;
  int N, K;
  double eps;
  std::vector<std::vector<int>> nbrs;
  std::vector<std::vector<double>> logG;  // aligned with nbrs
  Eigen::MatrixXd w;                      // (K+1) x N, rows 0 and K stay zero
  Eigen::MatrixXd log_alpha, log_beta;    // N x N (label, cell), -inf outside support
  // messages per label: f[a] and b[a] are (K+1) x N
  std::vector<Eigen::MatrixXd> f, b;

  explicit EntropicState(const GeodesicProblem& p) : prob(p) {
    N = p.grid.num_cells();
    K = p.grid.K;
    eps = p.epsilon;
    nbrs = neighbor_lists(p.grid);
    logG.resize(N);
    for (int x = 0; x < N; ++x)
      for (int y : nbrs[x]) logG[x].push_back(-p.grid.dist2(x, y) / (2.0 * p.grid.dt() * eps));
    w = Eigen::MatrixXd::Zero(K + 1, N);
    log_alpha = Eigen::MatrixXd::Constant(N, N, -INFINITY);
    log_beta = Eigen::MatrixXd::Constant(N, N, -INFINITY);
    for (int a = 0; a < N; ++a)
      for (int x = 0; x < N; ++x) {
        if (p.eta.m(a, x) > 0.0) log_alpha(a, x) = std::log(p.eta.m(a, x));
        if (p.gamma.m(a, x) > 0.0) log_beta(a, x) = 0.0;
      }
    f.assign(N, Eigen::MatrixXd::Constant(K + 1, N, -INFINITY));
    b.assign(N, Eigen::MatrixXd::Constant(K + 1, N, -INFINITY));
  }

  void forward_step(int a, int k) {
    // f_k from f_{k-1}
    auto& F = f[a];
    for (int y = 0; y < N; ++y) F(k, y) = -INFINITY;
    for (int x = 0; x < N; ++x) {
      double base = F(k - 1, x) + w(k - 1, x);
      if (base == -INFINITY) continue;
      for (size_t t = 0; t < nbrs[x].size(); ++t) {
        int y = nbrs[x][t];
        F(k, y) = lse_add(F(k, y), base + logG[x][t]);
      }
    }
  }

  void forward_init(int a) {
    for (int x = 0; x < N; ++x) f[a](0, x) = log_alpha(a, x);
  }

  void backward_all() {
    for (int a = 0; a < N; ++a) {
      auto& B = b[a];
      for (int y = 0; y < N; ++y) B(K, y) = log_beta(a, y);
      for (int k = K - 1; k >= 0; --k)
        for (int x = 0; x < N; ++x) {
          double acc = -INFINITY;
          for (size_t t = 0; t < nbrs[x].size(); ++t) {
            int y = nbrs[x][t];
            double v = B(k + 1, y);
            if (v == -INFINITY) continue;
            acc = lse_add(acc, logG[x][t] + w(k + 1, y) + v);
          }
          B(k, x) = acc;
        }
    }
  }

  void forward_all() {
    for (int a = 0; a < N; ++a) {
      forward_init(a);
      for (int k = 1; k <= K; ++k) forward_step(a, k);
    }
  }

  // aggregated log density (mass) at interior node k
  double log_slice_mass(int k, int x) const {
    double acc = -INFINITY;
    for (int a = 0; a < N; ++a) acc = lse_add(acc, f[a](k, x) + w(k, x) + b[a](k, x));
    return acc;
  }

  void sweep() {
    double logc = std::log(prob.grid.cell_mass());
    backward_all();
    for (int a = 0; a < N; ++a) forward_init(a);
    for (int k = 1; k < K; ++k) {
      for (int a = 0; a < N; ++a) forward_step(a, k);
      for (int x = 0; x < N; ++x) {
        double lm = log_slice_mass(k, x);
        w(k, x) += logc - lm;
      }
    }
    for (int a = 0; a < N; ++a) forward_step(a, K);
    // end scalings
    for (int a = 0; a < N; ++a)
      for (int y = 0; y < N; ++y) {
        if (log_beta(a, y) == -INFINITY) continue;
        double cur = f[a](K, y) + log_beta(a, y);
        if (cur == -INFINITY) throw std::runtime_error("entropic solver: endpoint unreachable");
        log_beta(a, y) += std::log(prob.gamma.m(a, y)) - cur;
      }
    // start scalings (no-op when eta_a is a Dirac and the end update already fixed the label mass)
    backward_all();
    for (int a = 0; a < N; ++a)
      for (int x = 0; x < N; ++x) {
        if (log_alpha(a, x) == -INFINITY) continue;
        double cur = log_alpha(a, x) + b[a](0, x);
        log_alpha(a, x) += std::log(prob.eta.m(a, x)) - cur;
      }
  }

  double marginal_error() {
    backward_all();
    forward_all();
    double err = 0.0;
    double n_d = N;
    for (int k = 1; k < K; ++k)
      for (int x = 0; x < N; ++x) err = std::max(err, std::abs(std::exp(log_slice_mass(k, x)) * n_d - 1.0));
    for (int a = 0; a < N; ++a)
      for (int x = 0; x < N; ++x) {
        if (log_alpha(a, x) != -INFINITY)
          err = std::max(err, std::abs(std::exp(log_alpha(a, x) + b[a](0, x)) - prob.eta.m(a, x)) * n_d);
        if (log_beta(a, x) != -INFINITY)
          err = std::max(err, std::abs(std::exp(f[a](K, x) + log_beta(a, x)) - prob.gamma.m(a, x)) * n_d);
      }
    return err;
  }

  // requires fresh messages
  double expected_action() const {
    double total = 0.0;
    for (int a = 0; a < N; ++a)
      for (int k = 0; k < K; ++k)
        for (int x = 0; x < N; ++x) {
          double base = f[a](k, x) + w(k, x);
          if (base == -INFINITY) continue;
          for (size_t t = 0; t < nbrs[x].size(); ++t) {
            int y = nbrs[x][t];
            double lb = b[a](k + 1, y);
            if (lb == -INFINITY) continue;
            double c = prob.grid.dist2(x, y) / (2.0 * prob.grid.dt());
            if (c == 0.0) continue;
            total += std::exp(base + logG[x][t] + w(k + 1, y) + lb) * c;
          }
        }
    return total;
  }
};

}  // namespace

GeodesicSolution solve_entropic(const GeodesicProblem& prob) {
  prob.validate();
  if (plans_equal(prob.eta, prob.gamma)) return constant_solution(prob);
  EntropicState st(prob);
  int K = prob.grid.K;
  int N = st.N;
  int it = 0;
  double err = INFINITY;
  const int check_every = 5;
  while (it < prob.max_iter) {
    st.sweep();
    ++it;
    if (it % check_every == 0 || it == prob.max_iter) {
      err = st.marginal_error();
      if (err <= prob.tol) break;
    }
  }
  if (!(err <= prob.tol)) {
    err = st.marginal_error();
    if (!(err <= prob.tol))
      throw std::runtime_error("entropic solver did not converge: marginal error " + std::to_string(err));
  } else {
    st.backward_all();
    st.forward_all();
  }

  GeodesicSolution sol;
  sol.value = st.expected_action();
  sol.pressure = PressureField(K, N);
  for (int k = 1; k < K; ++k)
    for (int x = 0; x < N; ++x) sol.pressure.at(k, x) = st.eps * st.w(k, x) / prob.grid.dt();
  sol.pressure.normalize_mean_zero();

  sol.flow.grid = prob.grid;
  PathSet ps = enumerate_problem_paths(prob);
  for (std::int64_t j = 0; j < ps.size(); ++j) {
    auto nodes = ps.path(j);
    int a = ps.labels[j];
    double lw = st.log_alpha(a, nodes[0]) + st.log_beta(a, nodes[K]);
    for (int k = 0; k < K; ++k) {
      lw += -prob.grid.dist2(nodes[k], nodes[k + 1]) / (2.0 * prob.grid.dt() * st.eps);
      if (k > 0) lw += st.w(k, nodes[k]);
    }
    double wgt = std::exp(lw);
    if (wgt > 0.0) sol.flow.paths.push_back(GridPath{a, nodes, wgt});
  }
  sol.diag.backend = "entropic";
  sol.diag.iterations = it;
  sol.diag.primal_value = sol.value;
  sol.diag.marginal_error = err;
  sol.diag.gap = err;
  sol.diag.num_paths = ps.size();
  sol.diag.converged = true;
  return sol;
}

GeodesicSolution solve(const GeodesicProblem& prob) {
  return prob.backend == Backend::Exact ? solve_exact(prob) : solve_entropic(prob);
}

double pressure_pairing(const PressureField& p, const PathMeasure& nu) {
  const auto& grid = nu.grid;
  int K = grid.K;
  if (p.interior_slices() != std::max(K - 1, 0) || (K > 1 && p.p.cols() != grid.num_cells()))
    throw std::invalid_argument("pressure field does not match the flow grid");
  double s = 0.0;
  for (const auto& path : nu.paths)
    for (int k = 1; k < K; ++k) s += path.weight * p.at(k, path.nodes[k]);
  double mean_part = 0.0;
  for (int k = 1; k < K; ++k) mean_part += p.p.row(k - 1).sum() * grid.cell_mass();
  return grid.dt() * (s - mean_part);
}

double dual_gap(const PathMeasure& eta_opt, const PressureField& p, const PathMeasure& nu, double tol) {
  if (!(eta_opt.grid == nu.grid)) throw std::invalid_argument("dual_gap: grids differ");
  int K = nu.grid.K;
  auto e0 = label_plan(eta_opt, 0), e1 = label_plan(eta_opt, K);
  auto n0 = label_plan(nu, 0), n1 = label_plan(nu, K);
  if ((e0.m - n0.m).cwiseAbs().maxCoeff() > tol || (e1.m - n1.m).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("dual_gap: endpoint plans of the competitor differ");
  return action_of_measure(nu) - action_of_measure(eta_opt) - pressure_pairing(p, nu);
}

}  // namespace geoflow
