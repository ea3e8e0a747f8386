#include "geoflow/eulerian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "geoflow/parallel.hpp"

namespace geoflow {

int EulerianFlow::label_slot(int a) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), a);
  if (it == labels.end() || *it != a) return -1;
  return static_cast<int>(it - labels.begin());
}

std::array<double, 2> EulerianFlow::velocity(int i, int k, int x) const {
  std::array<double, 2> v{0.0, 0.0};
  double mass = 0.0;
  for (auto it = edges[i][k].lower_bound({x, -1}); it != edges[i][k].end() && it->first.first == x; ++it) {
    auto off = grid.displacement(x, it->first.second);
    for (int j = 0; j < grid.d; ++j) v[j] += it->second * off[j] * grid.dx();
    mass += it->second;
  }
  if (mass <= 0.0) return {0.0, 0.0};
  for (int j = 0; j < grid.d; ++j) v[j] /= mass * grid.dt();
  return v;
}

void EulerianFlow::validate(double tol) const {
  grid.validate();
  if (c.size() != labels.size() || edges.size() != labels.size())
    throw std::invalid_argument("eulerian flow: label arrays have mismatched sizes");
  int N = grid.num_cells();
  for (size_t i = 0; i < labels.size(); ++i) {
    if (c[i].rows() != grid.K + 1 || c[i].cols() != N) throw std::invalid_argument("eulerian flow: density shape");
    if (static_cast<int>(edges[i].size()) != grid.K) throw std::invalid_argument("eulerian flow: edge layer count");
    for (int k = 0; k < grid.K; ++k)
      for (const auto& [e, m] : edges[i][k]) {
        if (m < 0.0) throw std::invalid_argument("eulerian flow: negative edge mass");
        grid.check_cell(e.first);
        grid.check_cell(e.second);
        if (!grid.step_allowed(e.first, e.second)) throw std::invalid_argument("eulerian flow: edge violates cap");
      }
  }
  double r = continuity_residual(*this);
  if (r > tol) throw std::invalid_argument("eulerian flow: continuity residual " + std::to_string(r));
  double ir = incompressibility_residual(*this);
  if (ir > tol) throw std::invalid_argument("eulerian flow: incompressibility residual " + std::to_string(ir));
}

EulerianFlow from_path_measure(const PathMeasure& eta) {
  const auto& g = eta.grid;
  EulerianFlow ef;
  ef.grid = g;
  for (const auto& p : eta.paths)
    if (p.weight > 0.0) ef.labels.push_back(p.label);
  std::sort(ef.labels.begin(), ef.labels.end());
  ef.labels.erase(std::unique(ef.labels.begin(), ef.labels.end()), ef.labels.end());
  int L = static_cast<int>(ef.labels.size());
  ef.c.assign(L, Eigen::MatrixXd::Zero(g.K + 1, g.num_cells()));
  ef.edges.assign(L, std::vector<std::map<std::pair<int, int>, double>>(g.K));
  double inv = 1.0 / g.cell_mass();
  for (const auto& p : eta.paths) {
    if (p.weight <= 0.0) continue;
    int i = ef.label_slot(p.label);
    double w = p.weight * inv;
    for (int k = 0; k <= g.K; ++k) ef.c[i](k, p.nodes[k]) += w;
    for (int k = 0; k < g.K; ++k) ef.edges[i][k][{p.nodes[k], p.nodes[k + 1]}] += w;
  }
  return ef;
}

PathMeasure to_path_measure(const EulerianFlow& ef) {
  const auto& g = ef.grid;
  double r = continuity_residual(ef);
  if (r > 1e-9) throw std::invalid_argument("to_path_measure: continuity violated (residual " + std::to_string(r) + ")");
  PathMeasure out;
  out.grid = g;
  const double thr = 1e-15;
  for (size_t i = 0; i < ef.labels.size(); ++i) {
    auto rem = ef.edges[i];
    for (auto& layer : rem)
      for (auto it = layer.begin(); it != layer.end();)
        it = it->second > thr ? std::next(it) : layer.erase(it);
    // peel the lexicographically smallest path until layer 0 is empty
    while (!rem.empty() && !rem[0].empty()) {
      std::vector<int> nodes;
      std::vector<std::map<std::pair<int, int>, double>::iterator> used;
      auto it0 = rem[0].begin();
      nodes.push_back(it0->first.first);
      nodes.push_back(it0->first.second);
      used.push_back(it0);
      double w = it0->second;
      for (int k = 1; k < g.K; ++k) {
        int x = nodes.back();
        auto it = rem[k].lower_bound({x, -1});
        if (it == rem[k].end() || it->first.first != x)
          throw std::runtime_error("to_path_measure: dead end during decomposition");
        nodes.push_back(it->first.second);
        used.push_back(it);
        w = std::min(w, it->second);
      }
      for (int k = 0; k < g.K; ++k) {
        used[k]->second -= w;
        if (used[k]->second <= thr) rem[k].erase(used[k]);
      }
      out.paths.push_back({ef.labels[i], std::move(nodes), w * g.cell_mass()});
    }
  }
  return out;
}

double eulerian_action(const EulerianFlow& ef) {
  const auto& g = ef.grid;
  int N = g.num_cells();
  double total = 0.0;
  for (size_t i = 0; i < ef.labels.size(); ++i)
    for (int k = 0; k < g.K; ++k)
      for (int x = 0; x < N; ++x) {
        double c = ef.c[i](k, x);
        if (c <= 0.0) continue;
        auto v = ef.velocity(static_cast<int>(i), k, x);
        double v2 = v[0] * v[0] + v[1] * v[1];
        total += 0.5 * v2 * c * g.dt() * g.cell_mass();
      }
  return total;
}

double edge_cost_action(const EulerianFlow& ef) {
  const auto& g = ef.grid;
  double total = 0.0;
  for (size_t i = 0; i < ef.labels.size(); ++i)
    for (int k = 0; k < g.K; ++k)
      for (const auto& [e, m] : ef.edges[i][k]) total += m * g.dist2(e.first, e.second) / (2.0 * g.dt());
  return total * g.cell_mass();
}

double continuity_residual(const EulerianFlow& ef) {
  const auto& g = ef.grid;
  int N = g.num_cells();
  double r = 0.0;
  for (size_t i = 0; i < ef.labels.size(); ++i) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g.K + 1, N), in = Eigen::MatrixXd::Zero(g.K + 1, N);
    for (int k = 0; k < g.K; ++k)
      for (const auto& [e, m] : ef.edges[i][k]) {
        out(k, e.first) += m;
        in(k + 1, e.second) += m;
      }
    for (int k = 0; k <= g.K; ++k) {
      if (k < g.K) r = std::max(r, (out.row(k) - ef.c[i].row(k)).cwiseAbs().maxCoeff());
      if (k > 0) r = std::max(r, (in.row(k) - ef.c[i].row(k)).cwiseAbs().maxCoeff());
      r = std::max(r, std::abs(ef.c[i].row(k).sum() - 1.0));
    }
  }
  return r;
}

double incompressibility_residual(const EulerianFlow& ef) {
  const auto& g = ef.grid;
  Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(g.K + 1, g.num_cells());
  for (const auto& c : ef.c) agg += c;
  // each label carries n^{-d}, so rho = sum_a c
  return (agg.array() - 1.0).abs().maxCoeff();
}

Eigen::MatrixXd eulerian_acceleration(const EulerianFlow& ef, int axis) {
  const auto& g = ef.grid;
  int N = g.num_cells();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(std::max(g.K - 1, 0), N);
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(std::max(g.K - 1, 0), N);
  for (size_t i = 0; i < ef.labels.size(); ++i)
    for (int k = 1; k < g.K; ++k) {
      for (const auto& [e, m] : ef.edges[i][k]) {
        acc(k - 1, e.first) += m * g.displacement(e.first, e.second)[axis] * g.dx();
        mass(k - 1, e.first) += m;
      }
      for (const auto& [e, m] : ef.edges[i][k - 1])
        acc(k - 1, e.second) -= m * g.displacement(e.first, e.second)[axis] * g.dx();
    }
  double dt2 = g.dt() * g.dt();
  for (int r = 0; r < acc.rows(); ++r)
    for (int x = 0; x < N; ++x) acc(r, x) = mass(r, x) > 0.0 ? acc(r, x) / (mass(r, x) * dt2) : 0.0;
  return acc;
}

namespace {

// neighbor along axis j in direction s (+1/-1); on the cube a step across a face maps to the cell itself
int axis_neighbor(const DomainGrid& g, int x, int j, int s, bool& reflected) {
  auto c = g.coords(x);
  int v = c[j] + s;
  reflected = false;
  if (g.geometry == Geometry::Torus) {
    v = ((v % g.n) + g.n) % g.n;
  } else if (v < 0 || v >= g.n) {
    reflected = true;
    v = c[j];
  }
  c[j] = v;
  return g.index(c);
}

}  // namespace

PressureField pressure_from_eulerian(const EulerianFlow& ef) {
  const auto& g = ef.grid;
  int N = g.num_cells();
  double h = g.dx();
  PressureField pf(g.K, N);
  if (g.K < 2) return pf;
  std::vector<Eigen::MatrixXd> acc;
  for (int j = 0; j < g.d; ++j) acc.push_back(eulerian_acceleration(ef, j));

  // -Lap_h + mean constraint, symmetric positive definite
  Eigen::MatrixXd A = Eigen::MatrixXd::Constant(N, N, 1.0 / N);
  for (int x = 0; x < N; ++x)
    for (int j = 0; j < g.d; ++j)
      for (int s : {-1, 1}) {
        bool refl;
        int y = axis_neighbor(g, x, j, s, refl);
        A(x, x) += 1.0 / (h * h);
        A(x, y) -= 1.0 / (h * h);
      }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);

  parallel_for(g.K - 1, [&](int r) {
    // -Lap p = div a  (from -grad p = a)
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
    for (int x = 0; x < N; ++x)
      for (int j = 0; j < g.d; ++j) {
        bool rp, rm;
        int xp = axis_neighbor(g, x, j, 1, rp);
        int xm = axis_neighbor(g, x, j, -1, rm);
        double ap = rp ? -acc[j](r, x) : acc[j](r, xp);
        double am = rm ? -acc[j](r, x) : acc[j](r, xm);
        rhs(x) += (ap - am) / (2.0 * h);
      }
    Eigen::VectorXd p = ldlt.solve(rhs);
    pf.p.row(r) = (p.array() - p.mean()).matrix().transpose();
  });
  return pf;
}

double pressure_gradient_residual(const EulerianFlow& ef, const PressureField& p) {
  const auto& g = ef.grid;
  int N = g.num_cells();
  double h = g.dx();
  double worst = 0.0;
  for (int j = 0; j < g.d; ++j) {
    auto acc = eulerian_acceleration(ef, j);
    for (int r = 0; r < acc.rows(); ++r)
      for (int x = 0; x < N; ++x) {
        bool rp, rm;
        int xp = axis_neighbor(g, x, j, 1, rp);
        int xm = axis_neighbor(g, x, j, -1, rm);
        double grad = (p.p(r, xp) - p.p(r, xm)) / (2.0 * h);
        worst = std::max(worst, std::abs(grad + acc(r, x)));
      }
  }
  return worst;
}

}  // namespace geoflow
