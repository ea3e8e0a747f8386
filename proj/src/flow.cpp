#include "geoflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace geoflow {

double PathMeasure::total_weight() const {
  double s = 0.0;
  for (const auto& p : paths) s += p.weight;
  return s;
}

std::vector<double> PathMeasure::label_mass() const {
  std::vector<double> m(grid.num_cells(), 0.0);
  for (const auto& p : paths) m.at(p.label) += p.weight;
  return m;
}

void PathMeasure::validate(double tol) const {
  grid.validate();
  int N = grid.num_cells();
  for (size_t i = 0; i < paths.size(); ++i) {
    const auto& p = paths[i];
    if (p.weight < 0.0) throw std::invalid_argument("negative weight on path " + std::to_string(i));
    if (static_cast<int>(p.nodes.size()) != grid.K + 1)
      throw std::invalid_argument("path " + std::to_string(i) + " has wrong node count");
    if (p.label < 0 || p.label >= N) throw std::invalid_argument("bad label on path " + std::to_string(i));
    for (int c : p.nodes) grid.check_cell(c);
    for (int k = 0; k < grid.K; ++k)
      if (!grid.step_allowed(p.nodes[k], p.nodes[k + 1]))
        throw std::invalid_argument("path " + std::to_string(i) + " exceeds the velocity cap");
  }
  if (std::abs(total_weight() - 1.0) > tol) throw std::invalid_argument("path weights do not sum to 1");
  auto lm = label_mass();
  for (int a = 0; a < N; ++a)
    if (std::abs(lm[a] - grid.cell_mass()) > tol)
      throw std::invalid_argument("label " + std::to_string(a) + " does not carry mass n^-d");
}

int TransportPlan::first_bad_marginal(double tol) const {
  int N = size();
  if (m.cols() != N) return 0;
  double target = 1.0 / N;
  for (int i = 0; i < N; ++i) {
    if ((m.row(i).array() < -tol).any()) return i;
    if (std::abs(m.row(i).sum() - target) > tol) return i;
  }
  for (int j = 0; j < N; ++j)
    if (std::abs(m.col(j).sum() - target) > tol) return N + j;
  return -1;
}

void TransportPlan::validate(double tol) const {
  int bad = first_bad_marginal(tol);
  if (bad < 0) return;
  if (bad < size()) throw std::invalid_argument("plan row " + std::to_string(bad) + " has a non-uniform marginal");
  throw std::invalid_argument("plan column " + std::to_string(bad - size()) + " has a non-uniform marginal");
}

Eigen::VectorXd TransportPlan::conditional(int a) const { return m.row(a).transpose() * double(size()); }

bool TransportPlan::is_deterministic() const {
  for (int a = 0; a < size(); ++a) {
    int nz = 0;
    for (int y = 0; y < size(); ++y)
      if (m(a, y) > 0.0) ++nz;
    if (nz != 1) return false;
  }
  return true;
}

TransportPlan identity_plan(int N) {
  return TransportPlan(Eigen::MatrixXd::Identity(N, N) / double(N));
}

TransportPlan plan_of_map(const std::vector<int>& g) {
  int N = static_cast<int>(g.size());
  std::vector<char> seen(N, 0);
  for (int x = 0; x < N; ++x) {
    if (g[x] < 0 || g[x] >= N || seen[g[x]]) throw std::invalid_argument("map is not a bijection");
    seen[g[x]] = 1;
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N, N);
  for (int x = 0; x < N; ++x) m(x, g[x]) = 1.0 / N;
  return TransportPlan(m);
}

void DensityField::validate(double tol) const {
  double cm = 1.0 / rho.cols();
  for (int k = 0; k < rho.rows(); ++k) {
    if ((rho.row(k).array() < 0.0).any()) throw std::invalid_argument("negative density");
    if (std::abs(rho.row(k).sum() * cm - 1.0) > tol) throw std::invalid_argument("density slice mass != 1");
  }
}

void PressureField::normalize_mean_zero() {
  for (int k = 0; k < p.rows(); ++k) p.row(k).array() -= p.row(k).mean();
}

double PressureField::max_slice_mean() const {
  double m = 0.0;
  for (int k = 0; k < p.rows(); ++k) m = std::max(m, std::abs(p.row(k).sum()));
  return m;
}

double path_action(const DomainGrid& grid, const std::vector<int>& nodes) {
  double s = 0.0;
  for (size_t k = 0; k + 1 < nodes.size(); ++k) s += grid.dist2(nodes[k], nodes[k + 1]);
  return s / (2.0 * grid.dt());
}

double action_of_measure(const PathMeasure& eta) {
  double a = 0.0;
  for (const auto& p : eta.paths) a += p.weight * path_action(eta.grid, p.nodes);
  return a;
}

double step_energy(const PathMeasure& eta) {
  double a = 0.0;
  for (const auto& p : eta.paths) a += p.weight * path_action(eta.grid, p.nodes) * 2.0 * eta.grid.dt();
  return a;
}

DensityField density_of(const PathMeasure& eta) {
  int N = eta.grid.num_cells();
  DensityField f;
  f.rho = Eigen::MatrixXd::Zero(eta.grid.K + 1, N);
  for (const auto& p : eta.paths)
    for (int k = 0; k <= eta.grid.K; ++k) f.rho(k, p.nodes[k]) += p.weight;
  f.rho *= double(N);
  return f;
}

double incompressibility_residual(const PathMeasure& eta) {
  auto f = density_of(eta);
  return (f.rho.array() - 1.0).abs().maxCoeff();
}

static void check_nodes(const PathMeasure& eta, int s, int t) {
  if (s < 0 || t > eta.grid.K || s >= t)
    throw std::invalid_argument("need time nodes 0 <= s < t <= K");
}

TransportPlan endpoint_plan(const PathMeasure& eta, int s, int t) {
  check_nodes(eta, s, t);
  int N = eta.grid.num_cells();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N, N);
  for (const auto& p : eta.paths) m(p.nodes[s], p.nodes[t]) += p.weight;
  return TransportPlan(m);
}

std::vector<LabelPlan> endpoint_plans_per_label(const PathMeasure& eta, int s, int t) {
  check_nodes(eta, s, t);
  int N = eta.grid.num_cells();
  std::vector<LabelPlan> all(N);
  std::vector<double> mass(N, 0.0);
  for (int a = 0; a < N; ++a) all[a].label = a;
  for (const auto& p : eta.paths) {
    if (p.weight <= 0.0) continue;
    all[p.label].entries[{p.nodes[s], p.nodes[t]}] += p.weight;
    mass[p.label] += p.weight;
  }
  std::vector<LabelPlan> out;
  for (int a = 0; a < N; ++a) {
    if (mass[a] <= 0.0) continue;
    for (auto& e : all[a].entries) e.second /= mass[a];
    out.push_back(std::move(all[a]));
  }
  return out;
}

TransportPlan label_plan(const PathMeasure& eta, int k) {
  if (k < 0 || k > eta.grid.K) throw std::invalid_argument("time node out of range");
  int N = eta.grid.num_cells();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N, N);
  for (const auto& p : eta.paths) m(p.label, p.nodes[k]) += p.weight;
  return TransportPlan(m);
}

PathMeasure restrict(const PathMeasure& eta, int s, int t) {
  check_nodes(eta, s, t);
  PathMeasure out;
  out.grid = eta.grid;
  out.grid.K = t - s;
  out.paths.reserve(eta.paths.size());
  for (const auto& p : eta.paths) {
    GridPath q;
    q.label = p.label;
    q.weight = p.weight;
    q.nodes.assign(p.nodes.begin() + s, p.nodes.begin() + t + 1);
    out.paths.push_back(std::move(q));
  }
  return canonicalize(out);
}

PathMeasure concatenate(const PathMeasure& eta1, const PathMeasure& eta2, double tol) {
  const auto& g1 = eta1.grid;
  const auto& g2 = eta2.grid;
  if (g1.d != g2.d || g1.n != g2.n || g1.geometry != g2.geometry)
    throw std::invalid_argument("concatenate: grids differ");
  int N = g1.num_cells();
  // junction masses per (label, cell)
  std::map<std::pair<int, int>, double> m1, m2;
  for (const auto& p : eta1.paths) m1[{p.label, p.nodes.back()}] += p.weight;
  for (const auto& p : eta2.paths) m2[{p.label, p.nodes.front()}] += p.weight;
  auto check = [&](const auto& a, const auto& b) {
    for (const auto& [key, w] : a) {
      auto it = b.find(key);
      double other = it == b.end() ? 0.0 : it->second;
      if (std::abs(w - other) > tol)
        throw std::invalid_argument("concatenate: marginal mismatch at junction for label " +
                                    std::to_string(key.first));
    }
  };
  check(m1, m2);
  check(m2, m1);

  std::map<std::pair<int, int>, std::vector<const GridPath*>> second;
  for (const auto& p : eta2.paths) second[{p.label, p.nodes.front()}].push_back(&p);

  PathMeasure out;
  out.grid = g1;
  out.grid.K = g1.K + g2.K;
  out.grid.cap = std::max(g1.cap, g2.cap);
  for (const auto& p : eta1.paths) {
    if (p.weight <= 0.0) continue;
    auto key = std::make_pair(p.label, p.nodes.back());
    double mj = m1[key];
    auto it = second.find(key);
    if (it == second.end()) continue;
    for (const GridPath* q : it->second) {
      if (q->weight <= 0.0) continue;
      GridPath r;
      r.label = p.label;
      r.weight = p.weight * q->weight / mj;
      r.nodes = p.nodes;
      r.nodes.insert(r.nodes.end(), q->nodes.begin() + 1, q->nodes.end());
      out.paths.push_back(std::move(r));
    }
  }
  (void)N;
  return canonicalize(out);
}

std::vector<double> speed_profile(const PathMeasure& eta) {
  std::vector<double> e(eta.grid.K, 0.0);
  double dt2 = eta.grid.dt() * eta.grid.dt();
  for (const auto& p : eta.paths)
    for (int k = 0; k < eta.grid.K; ++k) e[k] += p.weight * eta.grid.dist2(p.nodes[k], p.nodes[k + 1]) / dt2;
  return e;
}

PathMeasure canonicalize(const PathMeasure& eta, double drop_below) {
  std::map<std::pair<int, std::vector<int>>, double> acc;
  for (const auto& p : eta.paths) acc[{p.label, p.nodes}] += p.weight;
  PathMeasure out;
  out.grid = eta.grid;
  for (auto& [key, w] : acc) {
    if (w <= drop_below) continue;
    out.paths.push_back(GridPath{key.first, key.second, w});
  }
  return out;
}

}  // namespace geoflow
