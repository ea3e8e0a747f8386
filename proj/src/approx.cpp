#include "geoflow/approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "geoflow/assignment.hpp"
#include "geoflow/chefatica.hpp"
#include "geoflow/parallel.hpp"

namespace geoflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

double uniform53(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double bump_norm(int d) { return d == 1 ? 15.0 / 16.0 : 3.0 / kPi; }

double bump(double r2) { return r2 < 1.0 ? (1.0 - r2) * (1.0 - r2) : 0.0; }

// reflections of p across the faces closer than eps
std::vector<Point> images(int d, double eps, const Point& p) {
  std::vector<double> ax[2];
  for (int j = 0; j < 2; ++j) {
    if (j >= d) {
      ax[j] = {0.0};
      continue;
    }
    ax[j] = {p[j]};
    if (p[j] < eps) ax[j].push_back(-p[j]);
    if (1.0 - p[j] < eps) ax[j].push_back(2.0 - p[j]);
  }
  std::vector<Point> out;
  for (double a : ax[0])
    for (double b : ax[1]) out.push_back({a, b});
  return out;
}

// adds mass * kernel(centre c, radius eps) to the cell-centred G^d grid; c already includes images
void splat(int d, int G, double eps, const Point& c, double mass, Eigen::VectorXd& out) {
  double norm = mass * bump_norm(d) / std::pow(eps, d);
  int lo[2] = {0, 0}, hi[2] = {1, 1};
  for (int j = 0; j < d; ++j) {
    lo[j] = std::max(0, static_cast<int>(std::floor((c[j] - eps) * G - 0.5)));
    hi[j] = std::min(G, static_cast<int>(std::ceil((c[j] + eps) * G + 0.5)));
  }
  for (int i1 = lo[1]; i1 < hi[1]; ++i1)
    for (int i0 = lo[0]; i0 < hi[0]; ++i0) {
      double y0 = ((i0 + 0.5) / G - c[0]) / eps;
      double y1 = d == 2 ? ((i1 + 0.5) / G - c[1]) / eps : 0.0;
      double v = bump(y0 * y0 + y1 * y1);
      if (v > 0.0) out[i0 + G * i1] += norm * v;
    }
}

Point grid_center(int d, int G, int cell) {
  if (d == 1) return {(cell + 0.5) / G, 0.0};
  return {(cell % G + 0.5) / G, (cell / G + 0.5) / G};
}

Eigen::VectorXd smoothed_density(int d, int G, double radius, const std::vector<Point>& pts) {
  int cells = d == 1 ? G : G * G;
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(cells);
  double m = 1.0 / pts.size();
  for (const auto& p : pts)
    for (const auto& im : images(d, radius, p)) splat(d, G, radius, im, m, rho);
  return rho;
}

int ipow(int b, int e) {
  int r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

// ---------------------------------------------------------------- flows

double ShrunkFlow::transported_weight() const {
  double s = 0.0;
  for (const auto& t : tubes) s += t.weight;
  return s;
}

double ShrunkFlow::action() const {
  double a = 0.0;
  for (const auto& t : tubes)
    for (size_t k = 0; k + 1 < times.size(); ++k) {
      double dt = times[k + 1] - times[k];
      double d2 = 0.0;
      for (int j = 0; j < d; ++j) d2 += std::pow(t.centers[k + 1][j] - t.centers[k][j], 2);
      a += t.weight * d2 / (2.0 * dt);
    }
  return a;
}

ShrunkFlow lift_flow(const PathMeasure& eta) {
  const auto& g = eta.grid;
  ShrunkFlow f;
  f.d = g.d;
  f.n = g.n;
  f.geometry = g.geometry;
  for (int k = 0; k <= g.K; ++k) f.times.push_back(g.time(k));
  for (const auto& p : eta.paths) {
    Tube t;
    t.label = p.label;
    t.side = g.dx();
    t.weight = p.weight;
    t.centers.push_back(g.center(p.nodes[0]));
    // unwrapped on the torus
    for (int k = 0; k < g.K; ++k) {
      Offset o = g.displacement(p.nodes[k], p.nodes[k + 1]);
      Point c = t.centers.back();
      c[0] += o[0] * g.dx();
      c[1] += o[1] * g.dx();
      t.centers.push_back(c);
    }
    f.tubes.push_back(std::move(t));
  }
  return f;
}

ShrunkFlow shrink_flow(const PathMeasure& eta, double eps) {
  const auto& g = eta.grid;
  if (g.geometry != Geometry::Cube) throw std::invalid_argument("shrink_flow: needs the cube geometry");
  if (!(eps > 0.0 && eps < 0.125)) throw std::invalid_argument("shrink_flow: eps must lie in (0, 1/8)");
  double scale = 1.0 - 4.0 * eps;
  auto T = [&](const Point& x) {
    Point y{0.0, 0.0};
    for (int j = 0; j < g.d; ++j) y[j] = 2.0 * eps + scale * x[j];
    return y;
  };
  ShrunkFlow f;
  f.d = g.d;
  f.n = g.n;
  f.geometry = g.geometry;
  f.eps = eps;
  f.times.push_back(0.0);
  for (int k = 0; k <= g.K; ++k) f.times.push_back(eps + (1.0 - eps) * g.time(k));
  double wscale = std::pow(scale, g.d);
  for (const auto& p : eta.paths) {
    Tube t;
    t.label = p.label;
    t.side = scale * g.dx();
    t.weight = wscale * p.weight;
    t.centers.push_back(T(g.center(p.nodes[0])));
    for (int k = 0; k <= g.K; ++k) t.centers.push_back(T(g.center(p.nodes[k])));
    f.tubes.push_back(std::move(t));
  }
  f.steady_weight = 1.0 - wscale;
  return f;
}

std::vector<Sample> sample_paths(const ShrunkFlow& f, int N, std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("sample_paths: N must be positive");
  std::mt19937_64 rng(seed);
  std::vector<double> cum;
  double acc = 0.0;
  for (const auto& t : f.tubes) cum.push_back(acc += t.weight);
  double total = acc + (f.eps > 0.0 ? f.steady_weight : 0.0);
  const int nodes = static_cast<int>(f.times.size());
  std::vector<Sample> out;
  out.reserve(N);
  for (int i = 0; i < N; ++i) {
    double u = uniform53(rng) * total;
    int tube = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    Sample s;
    if (tube < static_cast<int>(f.tubes.size())) {
      const auto& t = f.tubes[tube];
      Point o{0.0, 0.0};
      for (int j = 0; j < f.d; ++j) o[j] = (uniform53(rng) - 0.5) * t.side;
      s.tube = tube;
      s.label = t.label;
      for (const auto& c : t.centers) s.x.push_back({c[0] + o[0], c[1] + o[1]});
    } else {
      Point p{0.0, 0.0};
      bool inside = true;
      while (inside) {
        inside = true;
        for (int j = 0; j < f.d; ++j) {
          p[j] = uniform53(rng);
          inside = inside && p[j] >= 2.0 * f.eps && p[j] <= 1.0 - 2.0 * f.eps;
        }
      }
      int c0 = std::min(f.n - 1, static_cast<int>(p[0] * f.n));
      int c1 = f.d == 2 ? std::min(f.n - 1, static_cast<int>(p[1] * f.n)) : 0;
      s.label = c0 + f.n * c1;
      s.x.assign(nodes, p);
    }
    out.push_back(std::move(s));
  }
  return out;
}

double sample_action(const std::vector<Sample>& s, const std::vector<double>& times, int d) {
  double a = 0.0;
  for (const auto& x : s)
    for (size_t k = 0; k + 1 < times.size(); ++k) {
      double d2 = 0.0;
      for (int j = 0; j < d; ++j) d2 += std::pow(x.x[k + 1][j] - x.x[k][j], 2);
      a += d2 / (2.0 * (times[k + 1] - times[k]));
    }
  return s.empty() ? 0.0 : a / s.size();
}

double bump_kernel(int d, double eps, const Point& center, const Point& x) {
  double v = 0.0;
  for (const auto& im : images(d, eps, center)) {
    double r2 = 0.0;
    for (int j = 0; j < d; ++j) r2 += std::pow((x[j] - im[j]) / eps, 2);
    v += bump(r2);
  }
  return v * bump_norm(d) / std::pow(eps, d);
}

// ---------------------------------------------------------------- Moser correction

MoserMap::MoserMap(int d, int G, const Eigen::VectorXd& rho, int steps) : d_(d), G_(G), steps_(steps) {
  int G2 = d == 2 ? G : 1;
  if (rho.size() != G * G2) throw std::invalid_argument("moser: density has the wrong size");
  double mean = rho.mean();
  if (!(mean > 0.0)) throw std::runtime_error("moser: density has no mass");
  Eigen::VectorXd r = rho / mean;
  min_rho_ = r.minCoeff();
  if (!(min_rho_ > 0.0)) throw std::runtime_error("moser: density not bounded away from 0");
  Eigen::MatrixXd C(G, G);
  for (int k = 0; k < G; ++k)
    for (int j = 0; j < G; ++j) C(k, j) = (k == 0 ? 1.0 : 2.0) / G * std::cos(kPi * k * (j + 0.5) / G);
  Eigen::Map<const Eigen::MatrixXd> R(r.data(), G, G2);
  rc_ = d == 2 ? Eigen::MatrixXd(C * R * C.transpose()) : Eigen::MatrixXd(C * R);
  pc_ = Eigen::MatrixXd::Zero(G, G2);
  for (int k1 = 0; k1 < G; ++k1)
    for (int k2 = 0; k2 < G2; ++k2)
      if (k1 + k2 > 0) pc_(k1, k2) = -rc_(k1, k2) / (kPi * kPi * (k1 * k1 + k2 * k2));
}

void MoserMap::eval(const Point& x, double s, Point& v) const {
  const int G = G_, G2 = d_ == 2 ? G_ : 1;
  Eigen::VectorXd c1(G), s1(G), c2(G2), s2(G2);
  auto fill = [](double x, Eigen::VectorXd& c, Eigen::VectorXd& sn) {
    double a = kPi * x;
    for (int k = 0; k < c.size(); ++k) {
      c[k] = std::cos(k * a);
      sn[k] = kPi * k * std::sin(k * a);
    }
  };
  fill(x[0], c1, s1);
  if (d_ == 2)
    fill(x[1], c2, s2);
  else {
    c2[0] = 1.0;
    s2[0] = 0.0;
  }
  Eigen::VectorXd t = pc_ * c2;
  double rho = c1.dot(rc_ * c2);
  double rs = std::max((1.0 - s) * rho + s, 1e-12);
  v[0] = -s1.dot(t) / rs;
  v[1] = d_ == 2 ? -c1.dot(pc_ * s2) / rs : 0.0;
}

Point MoserMap::flow(Point x, double s0, double s1) const {
  if (is_identity()) return x;
  double h = (s1 - s0) / steps_;
  auto clamp = [&](Point& p) {
    for (int j = 0; j < d_; ++j) p[j] = std::clamp(p[j], 0.0, 1.0);
  };
  for (int i = 0; i < steps_; ++i) {
    double s = s0 + i * h;
    Point k1, k2, k3, k4, y;
    eval(x, s, k1);
    for (int j = 0; j < 2; ++j) y[j] = x[j] + 0.5 * h * k1[j];
    clamp(y);
    eval(y, s + 0.5 * h, k2);
    for (int j = 0; j < 2; ++j) y[j] = x[j] + 0.5 * h * k2[j];
    clamp(y);
    eval(y, s + 0.5 * h, k3);
    for (int j = 0; j < 2; ++j) y[j] = x[j] + h * k3[j];
    clamp(y);
    eval(y, s + h, k4);
    for (int j = 0; j < 2; ++j) x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    clamp(x);
  }
  return x;
}

Point MoserMap::forward(const Point& x) const { return flow(x, 0.0, 1.0); }
Point MoserMap::backward(const Point& z) const { return flow(z, 1.0, 0.0); }

double MoserMap::density(const Point& x) const {
  if (is_identity()) return 1.0;
  const int G = G_, G2 = d_ == 2 ? G_ : 1;
  Eigen::VectorXd c1(G), c2(G2);
  for (int k = 0; k < G; ++k) c1[k] = std::cos(kPi * k * x[0]);
  for (int k = 0; k < G2; ++k) c2[k] = d_ == 2 ? std::cos(kPi * k * x[1]) : 1.0;
  return c1.dot(rc_ * c2);
}

double MoserMap::residual(int m) const {
  if (is_identity()) return 0.0;
  int pts = d_ == 2 ? m * m : m;
  std::vector<double> res(pts, 0.0);
  const double h = 1e-5;
  parallel_for(pts, [&](int i) {
    Point z = d_ == 1 ? Point{(i + 0.5) / m, 0.0} : Point{(i % m + 0.5) / m, (i / m + 0.5) / m};
    Point y = backward(z);
    double J[2][2] = {{1, 0}, {0, 1}};
    for (int a = 0; a < d_; ++a) {
      Point zp = z, zm = z;
      zp[a] += h;
      zm[a] -= h;
      Point yp = backward(zp), ym = backward(zm);
      for (int b = 0; b < d_; ++b) J[b][a] = (yp[b] - ym[b]) / (2.0 * h);
    }
    double det = d_ == 2 ? J[0][0] * J[1][1] - J[0][1] * J[1][0] : J[0][0];
    res[i] = std::abs(density(y) * det - 1.0);
  });
  return *std::max_element(res.begin(), res.end());
}

// ---------------------------------------------------------------- mollified flow

double MollifiedFlow::kernel(int i, const Point& x) const { return bump_kernel(d, eps, samples[i].x[0], x); }

double MollifiedFlow::density(int k, const Point& x) const {
  double s = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& w = samples[i].x;
    Point y{x[0] + w[0][0] - w[k][0], x[1] + w[0][1] - w[k][1]};
    s += bump_kernel(d, eps, w[0], y);
  }
  return s / samples.size();
}

double MollifiedFlow::sup_error() const {
  double e = 0.0;
  for (const auto& r : rho) e = std::max(e, (r.array() - 1.0).abs().maxCoeff());
  return e;
}

MollifiedFlow mollify(const std::vector<Sample>& samples, const std::vector<double>& times, int d, double eps,
                      int G) {
  if (samples.empty()) throw std::invalid_argument("mollify: no samples");
  if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("mollify: eps must lie in (0, 1/2)");
  if (G < 2) throw std::invalid_argument("mollify: grid too small");
  MollifiedFlow mf;
  mf.d = d;
  mf.eps = eps;
  mf.G = G;
  mf.times = times;
  mf.samples = samples;
  const int nodes = static_cast<int>(times.size());
  const int cells = d == 1 ? G : G * G;
  mf.rho.assign(nodes, Eigen::VectorXd::Zero(cells));
  const double m = 1.0 / samples.size();
  parallel_for(nodes, [&](int k) {
    for (const auto& s : samples) {
      Point shift{s.x[k][0] - s.x[0][0], s.x[k][1] - s.x[0][1]};
      for (const auto& im : images(d, eps, s.x[0])) splat(d, G, eps, {im[0] + shift[0], im[1] + shift[1]}, m, mf.rho[k]);
    }
  });
  return mf;
}

MollifiedFlow moser_correct(const MollifiedFlow& mf, double min_density) {
  MollifiedFlow out = mf;
  const int nodes = static_cast<int>(mf.rho.size());
  out.correction.assign(nodes, MoserMap());
  out.residual.assign(nodes, 0.0);
  parallel_for(nodes, [&](int k) {
    if ((mf.rho[k].array() - 1.0).abs().maxCoeff() == 0.0) return;
    MoserMap z(mf.d, mf.G, mf.rho[k]);
    if (z.min_density() < min_density)
      throw std::runtime_error("moser_correct: rho^N not bounded away from 0 at node " + std::to_string(k) +
                               " (min " + std::to_string(z.min_density()) + "); increase N or eps");
    out.residual[k] = z.residual();
    out.correction[k] = std::move(z);
  });
  return out;
}

// ---------------------------------------------------------------- splitting

namespace {

struct Box {
  int lo[2], hi[2];
};

}  // namespace

SplitResult deterministic_split(const MollifiedFlow& mf, double alpha, int R) {
  if (!(alpha > 0.0)) throw std::invalid_argument("deterministic_split: alpha must be positive");
  if (R < 1) throw std::invalid_argument("deterministic_split: bad refined grid");
  const int d = mf.d;
  const int cells = d == 1 ? R : R * R;
  const int N = static_cast<int>(mf.samples.size());
  SplitResult out;
  out.R = R;
  out.kernel.assign(cells, -1);
  out.position.resize(cells);
  std::iota(out.position.begin(), out.position.end(), 0);

  // kernel values a_i at refined cell centres, per cell sorted by sample index
  std::vector<std::vector<std::pair<int, double>>> w(cells);
  for (int i = 0; i < N; ++i) {
    const Point& c0 = mf.samples[i].x[0];
    int lo[2] = {0, 0}, hi[2] = {1, 1};
    for (int j = 0; j < d; ++j) {
      lo[j] = std::max(0, static_cast<int>(std::floor((c0[j] - mf.eps) * R - 0.5)));
      hi[j] = std::min(R, static_cast<int>(std::ceil((c0[j] + mf.eps) * R + 0.5)));
    }
    for (int i1 = lo[1]; i1 < hi[1]; ++i1)
      for (int i0 = lo[0]; i0 < hi[0]; ++i0) {
        int cell = i0 + R * i1;
        double v = bump_kernel(d, mf.eps, c0, grid_center(d, R, cell));
        if (v > 0.0) w[cell].push_back({i, v});
      }
  }

  auto cell_of = [&](int i0, int i1) { return i0 + R * i1; };
  auto cost = [&](const Box& b) {
    int count = 1, side = 0;
    for (int j = 0; j < d; ++j) {
      count *= b.hi[j] - b.lo[j];
      side = std::max(side, b.hi[j] - b.lo[j]);
    }
    if (count == 1) return std::pair<double, int>{0.0, 1};
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<int> S;
    for (int i1 = b.lo[1]; i1 < b.hi[1]; ++i1)
      for (int i0 = b.lo[0]; i0 < b.hi[0]; ++i0) {
        if (w[cell_of(i0, i1)].empty()) return std::pair<double, int>{inf, 0};
        for (auto& [k, v] : w[cell_of(i0, i1)]) S.push_back(k);
      }
    std::sort(S.begin(), S.end());
    S.erase(std::unique(S.begin(), S.end()), S.end());
    if (S.size() == 1) return std::pair<double, int>{0.0, 1};
    double bbar = inf;
    for (int i1 = b.lo[1]; i1 < b.hi[1]; ++i1)
      for (int i0 = b.lo[0]; i0 < b.hi[0]; ++i0) {
        const auto& l = w[cell_of(i0, i1)];
        if (l.size() != S.size()) return std::pair<double, int>{inf, static_cast<int>(S.size())};
        double sum = 0.0;
        for (auto& kv : l) sum += kv.second;
        for (auto& kv : l) bbar = std::min(bbar, kv.second / sum);
      }
    double M = static_cast<double>(S.size());
    double delta = static_cast<double>(side) / R;
    return std::pair<double, int>{M * M / mf.eps * std::pow(delta, d + 2) / (bbar * bbar), static_cast<int>(S.size())};
  };

  Box root{{0, 0}, {R, d == 2 ? R : 1}};
  std::vector<Box> boxes{root};
  std::vector<double> costs{cost(root).first};
  auto total = [&]() {
    double s = 0.0;
    for (double c : costs) s += c;
    return s;
  };
  while (total() > alpha) {
    int worst = static_cast<int>(std::max_element(costs.begin(), costs.end()) - costs.begin());
    Box b = boxes[worst];
    boxes.erase(boxes.begin() + worst);
    costs.erase(costs.begin() + worst);
    int mid[2], splits[2];
    for (int j = 0; j < 2; ++j) {
      mid[j] = (b.lo[j] + b.hi[j]) / 2;
      splits[j] = (j < d && b.hi[j] - b.lo[j] > 1) ? 2 : 1;
    }
    for (int s1 = 0; s1 < splits[1]; ++s1)
      for (int s0 = 0; s0 < splits[0]; ++s0) {
        Box c = b;
        if (splits[0] == 2) (s0 == 0 ? c.hi[0] : c.lo[0]) = mid[0];
        if (splits[1] == 2) (s1 == 0 ? c.hi[1] : c.lo[1]) = mid[1];
        boxes.push_back(c);
        costs.push_back(cost(c).first);
      }
  }
  out.budget_estimate = total();
  out.regions = static_cast<int>(boxes.size());

  std::vector<char> single(cells, 0);
  const double cm = 1.0 / cells;
  for (const auto& b : boxes) {
    int count = 1;
    for (int j = 0; j < d; ++j) count *= b.hi[j] - b.lo[j];
    if (count == 1) {
      single[cell_of(b.lo[0], b.lo[1])] = 1;
      continue;
    }
    auto [c, M] = cost(b);
    (void)c;
    if (M == 1) {
      int k = w[cell_of(b.lo[0], b.lo[1])].front().first;
      for (int i1 = b.lo[1]; i1 < b.hi[1]; ++i1)
        for (int i0 = b.lo[0]; i0 < b.hi[0]; ++i0) out.kernel[cell_of(i0, i1)] = k;
      continue;
    }
    ++out.multi_kernel_regions;
    out.multi_regions.push_back({b.lo[0], b.hi[0], b.lo[1], b.hi[1]});
    // 1D interpolation along the last axis, one column at a time
    const int ax = d - 1;
    const int m = b.hi[ax] - b.lo[ax];
    const int olo = d == 2 ? b.lo[0] : 0, ohi = d == 2 ? b.hi[0] : 1;
    for (int o = olo; o < ohi; ++o) {
      auto at = [&](int p) { return d == 2 ? cell_of(o, b.lo[1] + p) : cell_of(b.lo[0] + p, 0); };
      std::vector<int> ks;
      for (auto& kv : w[at(0)]) ks.push_back(kv.first);
      std::vector<std::vector<double>> dens(ks.size(), std::vector<double>(m));
      for (int p = 0; p < m; ++p) {
        const auto& l = w[at(p)];
        double sum = 0.0;
        for (auto& kv : l) sum += kv.second;
        for (size_t q = 0; q < l.size(); ++q) dens[q][p] = l[q].second / sum;
      }
      for (int p = 0; p < m; ++p) {  // exact partition of unity
        double s = 0.0;
        for (size_t q = 0; q + 1 < ks.size(); ++q) s += dens[q][p];
        dens.back()[p] = 1.0 - s;
      }
      Chefatica ch(dens);
      std::vector<double> target(m);
      std::vector<int> blk(m);
      for (int p = 0; p < m; ++p) {
        double u = (p + 0.5) / m;
        int q = 0;
        while (q + 1 < ch.M() && u >= ch.start(q + 1)) ++q;
        blk[p] = q;
        target[p] = ch.inverse_cdf(q, 1.0, u - ch.start(q));
      }
      std::vector<int> order(m);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int c2) { return target[a] < target[c2]; });
      for (int r = 0; r < m; ++r) {
        int p = order[r];
        out.kernel[at(p)] = ks[blk[p]];
        out.position[at(p)] = at(r);
        double dlt = static_cast<double>(r - p) / R;
        out.added_action += cm * dlt * dlt / (2.0 * mf.eps);
      }
    }
  }

  // single cells: error diffusion in raster order; uncovered cells follow the nearest sample
  std::vector<double> deficit(N, 0.0);
  for (int y = 0; y < cells; ++y) {
    if (!single[y]) continue;
    const auto& l = w[y];
    if (l.empty()) {
      ++out.uncovered_cells;
      Point c = grid_center(d, R, y);
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < N; ++i) {
        double d2 = 0.0;
        for (int j = 0; j < d; ++j) d2 += std::pow(mf.samples[i].x[0][j] - c[j], 2);
        if (d2 < best) {
          best = d2;
          out.kernel[y] = i;
        }
      }
      continue;
    }
    double sum = 0.0;
    for (auto& kv : l) sum += kv.second;
    int pick = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (auto& [k, v] : l) {
      deficit[k] += v / sum;
      if (deficit[k] > best) {
        best = deficit[k];
        pick = k;
      }
    }
    deficit[pick] -= 1.0;
    out.kernel[y] = pick;
  }
  return out;
}

// ---------------------------------------------------------------- maps

bool is_bijection(const std::vector<int>& g) {
  std::vector<char> seen(g.size(), 0);
  for (int v : g) {
    if (v < 0 || v >= static_cast<int>(g.size()) || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

int MPMapFlow::num_cells() const { return ipow(cells_per_axis(), d); }

Point MPMapFlow::center(int cell) const { return grid_center(d, cells_per_axis(), cell); }

double MPMapFlow::dist2(int x, int y) const {
  const int R = cells_per_axis();
  int a[2] = {d == 1 ? x : x % R, d == 1 ? 0 : x / R};
  int b[2] = {d == 1 ? y : y % R, d == 1 ? 0 : y / R};
  double s = 0.0;
  for (int j = 0; j < d; ++j) {
    int delta = b[j] - a[j];
    if (geometry == Geometry::Torus) {
      delta = ((delta % R) + R) % R;
      if (2 * delta > R) delta -= R;
    }
    s += static_cast<double>(delta) * delta;
  }
  return s / (static_cast<double>(R) * R);
}

double MPMapFlow::action() const {
  double a = 0.0;
  const int cells = num_cells();
  for (size_t k = 0; k + 1 < maps.size(); ++k) {
    double dt = times[k + 1] - times[k];
    double s = 0.0;
    for (int y = 0; y < cells; ++y) s += dist2(maps[k][y], maps[k + 1][y]);
    a += s / (2.0 * dt);
  }
  return a / cells;
}

double MPMapFlow::density_residual() const {
  double r = 0.0;
  const int cells = num_cells();
  for (const auto& g : maps) {
    std::vector<int> cnt(cells, 0);
    for (int v : g) {
      if (v < 0 || v >= cells) return std::numeric_limits<double>::infinity();
      ++cnt[v];
    }
    for (int c : cnt) r = std::max(r, std::abs(c - 1.0));
  }
  return r;
}

bool MPMapFlow::all_bijections() const {
  for (const auto& g : maps)
    if (static_cast<int>(g.size()) != num_cells() || !is_bijection(g)) return false;
  return true;
}

double endpoint_w2(const MPMapFlow& g, const PathMeasure& eta) {
  const auto& cg = eta.grid;
  const int r = g.refine, R = g.cells_per_axis(), cells = g.num_cells();
  const int per = ipow(r, g.d);
  const int L = 2 * cells;
  auto refined = [&](int coarse, int o) {
    Offset c = cg.coords(coarse);
    int o0 = o % r, o1 = o / r;
    return g.d == 1 ? c[0] * r + o0 : (c[0] * r + o0) + R * (c[1] * r + o1);
  };
  // target atoms with largest-remainder rounding to L units
  std::vector<std::pair<int, int>> atoms;
  std::vector<double> want;
  double tw = eta.total_weight();
  for (const auto& p : eta.paths)
    for (int o = 0; o < per; ++o) {
      atoms.push_back({refined(p.nodes.front(), o), refined(p.nodes.back(), o)});
      want.push_back(p.weight / tw / per * L);
    }
  std::vector<int> units(want.size());
  int used = 0;
  for (size_t i = 0; i < want.size(); ++i) used += units[i] = static_cast<int>(std::floor(want[i]));
  std::vector<int> order(want.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return want[a] - units[a] > want[b] - units[b]; });
  for (int i = 0; used < L; ++i, ++used) ++units[order[i % order.size()]];
  std::vector<std::pair<int, int>> tgt;
  for (size_t i = 0; i < atoms.size(); ++i)
    for (int u = 0; u < units[i]; ++u) tgt.push_back(atoms[i]);
  std::vector<std::pair<int, int>> src;
  for (int y = 0; y < cells; ++y)
    for (int u = 0; u < 2; ++u) src.push_back({y, g.maps.back()[y]});
  Eigen::MatrixXd cost(L, L);
  parallel_for(L, [&](int i) {
    for (int j = 0; j < L; ++j)
      cost(i, j) = g.dist2(src[i].first, tgt[j].first) + g.dist2(src[i].second, tgt[j].second);
  });
  double total = 0.0;
  solve_assignment(cost, &total);
  return std::sqrt(std::max(0.0, total / L));
}

// ---------------------------------------------------------------- pipeline

namespace {

bool deterministic_from_identity(const PathMeasure& eta) {
  std::vector<int> count(eta.grid.num_cells(), 0);
  for (const auto& p : eta.paths) {
    if (p.weight <= 0.0) continue;
    if (p.nodes.front() != p.label) return false;
    if (++count[p.label] > 1) return false;
  }
  return true;
}

ApproxReport lift_deterministic(const PathMeasure& eta, int refine) {
  const auto& cg = eta.grid;
  ApproxReport rep;
  rep.short_circuit = true;
  auto& f = rep.flow;
  f.d = cg.d;
  f.n = cg.n;
  f.refine = refine;
  f.geometry = cg.geometry;
  const int R = f.cells_per_axis(), cells = f.num_cells(), per = ipow(refine, cg.d);
  for (int k = 0; k <= cg.K; ++k) f.times.push_back(cg.time(k));
  f.maps.assign(cg.K + 1, std::vector<int>(cells, -1));
  for (const auto& p : eta.paths) {
    if (p.weight <= 0.0) continue;
    for (int o = 0; o < per; ++o) {
      int o0 = o % refine, o1 = o / refine;
      auto ref = [&](int coarse) {
        Offset c = cg.coords(coarse);
        return cg.d == 1 ? c[0] * refine + o0 : (c[0] * refine + o0) + R * (c[1] * refine + o1);
      };
      int y = ref(p.nodes[0]);
      for (int k = 0; k <= cg.K; ++k) f.maps[k][y] = ref(p.nodes[k]);
    }
  }
  return rep;
}

}  // namespace

ApproxReport approximate(const PathMeasure& eta, const ApproxOptions& opt) {
  eta.validate();
  if (opt.refine < 1) throw std::invalid_argument("approximate: refine must be positive");
  ApproxReport rep;
  if (deterministic_from_identity(eta)) {
    rep = lift_deterministic(eta, opt.refine);
  } else {
    if (eta.grid.geometry != Geometry::Cube) throw std::invalid_argument("approximate: needs the cube geometry");
    for (const auto& p : eta.paths)
      if (p.nodes.front() != p.label) throw std::invalid_argument("approximate: flow must start from the identity plan");
    if (opt.N < 1 || !(opt.alpha > 0.0)) throw std::invalid_argument("approximate: N and alpha must be positive");
    if (opt.max_retries < 1) throw std::invalid_argument("approximate: need at least one attempt");
    const int d = eta.grid.d, R = eta.grid.n * opt.refine;
    const int cells = ipow(R, d), G = 2 * R;
    ShrunkFlow sf = shrink_flow(eta, opt.eps);
    rep.shrunk_action = sf.action();
    std::string last_error;
    bool ok = false;
    for (int attempt = 0; attempt < opt.max_retries && !ok; ++attempt) {
      std::uint64_t seed = opt.seed + attempt;
      rep.attempts = attempt + 1;
      rep.seed_used = seed;
      auto samples = sample_paths(sf, opt.N, seed);
      MollifiedFlow mf = mollify(samples, sf.times, d, opt.eps, G);
      SplitResult split = deterministic_split(mf, opt.alpha, R);
      MPMapFlow f;
      f.d = d;
      f.n = eta.grid.n;
      f.refine = opt.refine;
      f.geometry = eta.grid.geometry;
      f.times = sf.times;
      const int nodes = static_cast<int>(sf.times.size());
      f.maps.assign(nodes, std::vector<int>(cells));
      std::iota(f.maps[0].begin(), f.maps[0].end(), 0);
      f.maps[1] = split.position;
      std::vector<double> resid(nodes, 0.0);
      std::vector<std::string> err(nodes);
      const double radius = std::max(opt.eps, 2.5 / R);
      parallel_for(nodes - 2, [&](int q) {
        const int k = q + 2;
        std::vector<Point> z(cells);
        for (int y = 0; y < cells; ++y) {
          const auto& w = mf.samples[split.kernel[y]].x;
          Point c = f.center(split.position[y]);
          for (int j = 0; j < d; ++j) z[y][j] = std::clamp(c[j] + w[k][j] - w[1][j], 0.0, 1.0);
        }
        try {
          MoserMap zeta(d, G, smoothed_density(d, G, radius, z));
          if (zeta.min_density() < 0.05) throw std::runtime_error("carried density not bounded away from 0");
          resid[k] = zeta.residual();
          for (auto& p : z) p = zeta.forward(p);
        } catch (const std::runtime_error& e) {
          err[k] = e.what();
          return;
        }
        Eigen::MatrixXd cost(cells, cells);
        for (int y = 0; y < cells; ++y)
          for (int c = 0; c < cells; ++c) {
            Point cc = f.center(c);
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += (z[y][j] - cc[j]) * (z[y][j] - cc[j]);
            cost(y, c) = s;
          }
        f.maps[k] = solve_assignment(cost);
      });
      double worst = *std::max_element(resid.begin(), resid.end());
      bool failed = false;
      for (const auto& e : err)
        if (!e.empty()) {
          last_error = e;
          failed = true;
        }
      if (!failed && worst > opt.tol_rho) {
        last_error = "density residual " + std::to_string(worst) + " above tolerance";
        failed = true;
      }
      if (failed) continue;
      ok = true;
      rep.flow = std::move(f);
      rep.sample_action = sample_action(samples, sf.times, d);
      rep.rho_sup_error = mf.sup_error();
      rep.correction_residual = worst;
      rep.added_action = split.added_action;
    }
    if (!ok)
      throw std::runtime_error("approximate: density correction failed after " + std::to_string(opt.max_retries) +
                               " attempts: " + last_error);
  }
  rep.target_action = action_of_measure(eta);
  rep.action = rep.flow.action();
  rep.action_error = std::abs(rep.action - rep.target_action);
  rep.endpoint_w2 = endpoint_w2(rep.flow, eta);
  return rep;
}

}  // namespace geoflow
