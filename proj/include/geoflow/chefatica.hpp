#pragma once

#include <vector>

namespace geoflow {

// Piece of a piecewise-constant density on [0, 1].
struct Segment {
  double x0 = 0.0, x1 = 0.0, value = 0.0;
};

// Explicit 1D splitting of the uniform density into M prescribed densities b_1..b_M.
// J_k = [start_k, start_k + l_k) are consecutive intervals, l_k = int b_k.
// Stages on [0, 1/2] merge J_{i+1} into the cumulative block, then [1/2, 1] interpolates linearly.
class Chefatica {
 public:
  // b[k][j] is the value of b_k on cell j of a uniform grid over [0, 1]; sum_k b_k = 1 cellwise.
  explicit Chefatica(std::vector<std::vector<double>> b);

  int M() const { return static_cast<int>(b_.size()); }
  int grid_size() const { return G_; }
  double length(int k) const { return l_[k]; }
  double start(int k) const { return start_[k]; }
  double lower_bound() const { return bbar_; }
  // t_0 = 0 < ... < t_{M-1} = 1/2
  std::vector<double> stage_times() const;

  std::vector<Segment> density(int k, double t) const;
  double density_at(int k, double t, double x) const;
  double cdf(int k, double t, double x) const;
  double inverse_cdf(int k, double t, double m) const;
  // h(t, y): measure-preserving, h(0, .) = id, h(t, .) pushes chi_{J_k} to rho^k_t
  double map(double t, double y) const;
  // CDF of b_k at x
  double target_cdf(int k, double x) const;

 private:
  std::vector<std::vector<double>> b_;
  int G_ = 0;
  std::vector<double> l_, start_, cum_;
  double bbar_ = 0.0;
};

struct ChefaticaReport {
  double pushforward_error = 0.0;  // max |(F^k_1)^{-1}(B_k(y_j)) - y_j|
  double sum_error = 0.0;          // max |sum_k rho^k_t - 1| on sampled times
  double support_violation = 0.0;  // max (bbar - rho) on the support, and gaps inside supports
  double lip_stage = 0.0;          // measured sup |d/dt F^k_t| on [0, 1/2]
  double lip_final = 0.0;          // same on [1/2, 1]
  double lip_stage_bound = 0.0;    // (M-1)/2
  double lip_final_bound = 2.0;
  double action = 0.0;             // int int 1/2 |d/dt h|^2 by quadrature
  double action_bound = 0.0;       // M^2 / bbar^2
  std::vector<double> stage_lip;   // per stage measured
};

ChefaticaReport check_chefatica(const Chefatica& c, int time_samples = 64, int space_refine = 4);

}  // namespace geoflow
