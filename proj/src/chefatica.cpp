#include "geoflow/chefatica.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace geoflow {

Chefatica::Chefatica(std::vector<std::vector<double>> b) : b_(std::move(b)) {
  if (b_.empty()) throw std::invalid_argument("chefatica: need at least one density");
  G_ = static_cast<int>(b_[0].size());
  if (G_ < 1) throw std::invalid_argument("chefatica: empty grid");
  bbar_ = std::numeric_limits<double>::infinity();
  for (const auto& bk : b_) {
    if (static_cast<int>(bk.size()) != G_) throw std::invalid_argument("chefatica: densities on different grids");
    for (double v : bk) bbar_ = std::min(bbar_, v);
  }
  if (!(bbar_ > 0.0)) throw std::invalid_argument("chefatica: densities must be bounded below by a positive constant");
  for (int j = 0; j < G_; ++j) {
    double s = 0.0;
    for (const auto& bk : b_) s += bk[j];
    if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("chefatica: densities do not sum to 1 on cell " + std::to_string(j));
  }
  cum_.push_back(0.0);
  for (const auto& bk : b_) {
    double l = 0.0;
    for (double v : bk) l += v;
    l /= G_;
    start_.push_back(cum_.back());
    l_.push_back(l);
    cum_.push_back(cum_.back() + l);
  }
}

std::vector<double> Chefatica::stage_times() const {
  std::vector<double> t;
  int m = M();
  if (m == 1) return {0.0, 0.5};
  for (int i = 0; i < m; ++i) t.push_back(i / (2.0 * (m - 1)));
  return t;
}

std::vector<Segment> Chefatica::density(int k, double t) const {
  int m = M();
  t = std::clamp(t, 0.0, 1.0);
  std::vector<Segment> out;
  auto push = [&](double x0, double x1, double v) {
    if (x1 > x0) out.push_back({x0, x1, v});
  };
  if (t > 0.5) {
    double s = 2.0 * t - 1.0;
    for (int j = 0; j < G_; ++j)
      push(static_cast<double>(j) / G_, static_cast<double>(j + 1) / G_, (1.0 - s) * l_[k] + s * b_[k][j]);
    return out;
  }
  if (m == 1) {
    push(0.0, 1.0, 1.0);
    return out;
  }
  double tau = 1.0 / (2.0 * (m - 1));
  int i = std::min(m - 1, static_cast<int>(std::floor(t / tau)) + 1);
  double s = std::clamp((t - (i - 1) * tau) / tau, 0.0, 1.0);
  double Lold = cum_[i], Lnew = cum_[i + 1];
  double a = Lold * (1.0 - s), bnd = Lold + s * l_[i];
  if (k < i) {
    push(0.0, a, l_[k] / Lold);
    push(a, bnd, l_[k] / Lnew);
  } else if (k == i) {
    push(a, bnd, l_[i] / Lnew);
    push(bnd, Lnew, 1.0);
  } else {
    push(start_[k], start_[k] + l_[k], 1.0);
  }
  return out;
}

double Chefatica::density_at(int k, double t, double x) const {
  for (const auto& sg : density(k, t))
    if (x >= sg.x0 && x < sg.x1) return sg.value;
  return 0.0;
}

double Chefatica::cdf(int k, double t, double x) const {
  double acc = 0.0;
  for (const auto& sg : density(k, t)) {
    if (x <= sg.x0) break;
    acc += sg.value * (std::min(x, sg.x1) - sg.x0);
  }
  return acc;
}

double Chefatica::inverse_cdf(int k, double t, double m) const {
  auto segs = density(k, t);
  if (segs.empty()) return 0.0;
  if (m <= 0.0) return segs.front().x0;
  double acc = 0.0;
  for (const auto& sg : segs) {
    double mass = sg.value * (sg.x1 - sg.x0);
    if (m <= acc + mass) return std::min(sg.x1, sg.x0 + (m - acc) / sg.value);
    acc += mass;
  }
  return segs.back().x1;
}

double Chefatica::map(double t, double y) const {
  auto it = std::upper_bound(start_.begin(), start_.end(), y);
  int k = std::max(0, static_cast<int>(it - start_.begin()) - 1);
  double m = std::clamp(y - start_[k], 0.0, l_[k]);
  return inverse_cdf(k, t, m);
}

double Chefatica::target_cdf(int k, double x) const {
  double acc = 0.0;
  for (int j = 0; j < G_; ++j) {
    double x0 = static_cast<double>(j) / G_, x1 = static_cast<double>(j + 1) / G_;
    if (x <= x0) break;
    acc += b_[k][j] * (std::min(x, x1) - x0);
  }
  return acc;
}

ChefaticaReport check_chefatica(const Chefatica& c, int time_samples, int space_refine) {
  ChefaticaReport rep;
  int M = c.M(), G = c.grid_size();
  rep.lip_stage_bound = (M - 1) / 2.0;
  rep.action_bound = M * M / (c.lower_bound() * c.lower_bound());

  for (int k = 0; k < M; ++k)
    for (int j = 0; j <= G; ++j) {
      double y = static_cast<double>(j) / G;
      double h = c.inverse_cdf(k, 1.0, c.target_cdf(k, y));
      rep.pushforward_error = std::max(rep.pushforward_error, std::abs(h - y));
    }

  // time samples: stage midpoints plus the stage boundaries
  auto times = c.stage_times();
  std::vector<std::pair<double, double>> pieces;  // [t0, t1)
  for (size_t i = 0; i + 1 < times.size(); ++i) pieces.push_back({times[i], times[i + 1]});
  pieces.push_back({0.5, 1.0});

  int Nx = G * space_refine;
  for (size_t pi = 0; pi < pieces.size(); ++pi) {
    auto [t0, t1] = pieces[pi];
    double len = t1 - t0;
    if (len <= 0.0) continue;
    double delta = len * 1e-6;
    double lip = 0.0;
    for (int ts = 0; ts <= time_samples; ++ts) {
      double t = t0 + len * ts / time_samples;
      // partition of unity and support structure
      std::vector<double> brk{0.0, 1.0};
      for (int k = 0; k < M; ++k) {
        auto segs = c.density(k, t);
        for (size_t q = 0; q < segs.size(); ++q) {
          brk.push_back(segs[q].x0);
          brk.push_back(segs[q].x1);
          rep.support_violation = std::max(rep.support_violation, c.lower_bound() - segs[q].value - 1e-15);
          if (q > 0) rep.support_violation = std::max(rep.support_violation, segs[q].x0 - segs[q - 1].x1);
        }
      }
      std::sort(brk.begin(), brk.end());
      for (size_t q = 0; q + 1 < brk.size(); ++q) {
        if (brk[q + 1] - brk[q] < 1e-14) continue;
        double x = 0.5 * (brk[q] + brk[q + 1]);
        double s = 0.0;
        for (int k = 0; k < M; ++k) s += c.density_at(k, t, x);
        rep.sum_error = std::max(rep.sum_error, std::abs(s - 1.0));
      }
      if (ts == time_samples) continue;
      // measured time derivative of the CDFs at the midpoint of the sample
      double tm = t0 + len * (ts + 0.5) / time_samples;
      for (int k = 0; k < M; ++k)
        for (int j = 0; j <= Nx; ++j) {
          double x = static_cast<double>(j) / Nx;
          double d = (c.cdf(k, tm + delta, x) - c.cdf(k, tm - delta, x)) / (2.0 * delta);
          lip = std::max(lip, std::abs(d));
        }
      // action: Lagrangian difference quotients of h over y midpoints
      double e = 0.0;
      for (int j = 0; j < Nx; ++j) {
        double y = (j + 0.5) / Nx;
        double v = (c.map(tm + delta, y) - c.map(tm - delta, y)) / (2.0 * delta);
        e += 0.5 * v * v / Nx;
      }
      rep.action += e * len / time_samples;
    }
    if (pi + 1 < pieces.size()) {
      rep.stage_lip.push_back(lip);
      rep.lip_stage = std::max(rep.lip_stage, lip);
    } else {
      rep.lip_final = lip;
    }
  }
  return rep;
}

}  // namespace geoflow
