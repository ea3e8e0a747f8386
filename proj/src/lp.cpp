#include "geoflow/lp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace geoflow {

std::string to_string(LPStatus s) {
  switch (s) {
    case LPStatus::Optimal: return "optimal";
    case LPStatus::Infeasible: return "infeasible";
    case LPStatus::IterationLimit: return "iteration_limit";
  }
  return "?";
}

namespace {

class Simplex {
 public:
  Simplex(const LinearProgram& lp, const LPOptions& opt) : lp_(lp), opt_(opt) {
    m_ = lp.num_rows;
    n_ = static_cast<int>(lp.columns.size());
    if (static_cast<int>(lp.b.size()) != m_ || static_cast<int>(lp.cost.size()) != n_)
      throw std::invalid_argument("linear program has inconsistent sizes");
    sign_.assign(m_, 1.0);
    b_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      if (lp.b[i] < 0) sign_[i] = -1.0;
      b_(i) = std::abs(lp.b[i]);
    }
  }

  LPResult run() {
    LPResult res;
    // columns 0..n-1 structural, n..n+m-1 artificial
    basis_.resize(m_);
    is_basic_.assign(n_ + m_, -1);
    for (int i = 0; i < m_; ++i) {
      basis_[i] = n_ + i;
      is_basic_[n_ + i] = i;
    }
    binv_ = Eigen::MatrixXd::Identity(m_, m_);
    xb_ = b_;

    // phase 1
    phase_cost_.assign(n_ + m_, 0.0);
    for (int i = 0; i < m_; ++i) phase_cost_[n_ + i] = 1.0;
    allow_artificial_entry_ = false;
    if (!iterate(res)) {
      res.status = LPStatus::IterationLimit;
      return res;
    }
    double infeas = 0.0;
    for (int i = 0; i < m_; ++i)
      if (basis_[i] >= n_) infeas += std::max(0.0, xb_(i));
    res.phase1_residual = infeas;
    double scale = std::max(1.0, b_.cwiseAbs().maxCoeff());
    if (infeas > 1e-8 * scale) {
      res.status = LPStatus::Infeasible;
      res.iterations = iterations_;
      return res;
    }
    drive_out_artificials(res);

    // phase 2
    for (int j = 0; j < n_; ++j) phase_cost_[j] = lp_.cost[j];
    for (int i = 0; i < m_; ++i) phase_cost_[n_ + i] = 0.0;
    if (!iterate(res)) {
      res.status = LPStatus::IterationLimit;
      return res;
    }
    refactor();
    finalize(res);
    return res;
  }

 private:
  double col_dot(const Eigen::VectorXd& y, int j) const {
    if (j >= n_) return y(j - n_);
    const auto& c = lp_.columns[j];
    double s = 0.0;
    for (size_t t = 0; t < c.rows.size(); ++t) s += y(c.rows[t]) * c.vals[t] * sign_[c.rows[t]];
    return s;
  }

  Eigen::VectorXd ftran(int j) const {
    if (j >= n_) return binv_.col(j - n_);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m_);
    const auto& c = lp_.columns[j];
    for (size_t t = 0; t < c.rows.size(); ++t) out += binv_.col(c.rows[t]) * (c.vals[t] * sign_[c.rows[t]]);
    return out;
  }

  Eigen::VectorXd duals() const {
    Eigen::VectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb(i) = phase_cost_[basis_[i]];
    return binv_.transpose() * cb;
  }

  void refactor() {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
    for (int i = 0; i < m_; ++i) {
      int j = basis_[i];
      if (j >= n_) {
        B(j - n_, i) = 1.0;
      } else {
        const auto& c = lp_.columns[j];
        for (size_t t = 0; t < c.rows.size(); ++t) B(c.rows[t], i) += c.vals[t] * sign_[c.rows[t]];
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    binv_ = lu.inverse();
    xb_ = binv_ * b_;
    for (int i = 0; i < m_; ++i)
      if (xb_(i) < 0 && xb_(i) > -opt_.feas_tol) xb_(i) = 0.0;
    since_refactor_ = 0;
  }

  void pivot(int r, int enter, const Eigen::VectorXd& alpha) {
    double ar = alpha(r);
    Eigen::RowVectorXd rowr = binv_.row(r) / ar;
    for (int i = 0; i < m_; ++i) {
      if (i == r || alpha(i) == 0.0) continue;
      binv_.row(i) -= alpha(i) * rowr;
    }
    binv_.row(r) = rowr;
    is_basic_[basis_[r]] = -1;
    basis_[r] = enter;
    is_basic_[enter] = r;
    ++iterations_;
    if (++since_refactor_ >= opt_.refactor_every) refactor();
  }

  bool entering_allowed(int j) const {
    if (is_basic_[j] >= 0) return false;
    if (j >= n_ && !allow_artificial_entry_) return false;
    return true;
  }

  bool iterate(LPResult& res) {
    int degenerate_run = 0;
    const int bland_after = 50;
    while (true) {
      if (iterations_ >= opt_.max_iterations) {
        res.iterations = iterations_;
        return false;
      }
      Eigen::VectorXd y = duals();
      bool bland = degenerate_run > bland_after;
      int enter = -1;
      double best = -opt_.opt_tol;
      int total = n_ + (allow_artificial_entry_ ? m_ : 0);
      for (int j = 0; j < total; ++j) {
        if (!entering_allowed(j)) continue;
        double cj = phase_cost_[j];
        double dj = cj - col_dot(y, j);
        double tol = opt_.opt_tol * std::max(1.0, std::abs(cj));
        if (dj < -tol) {
          if (bland) {
            enter = j;
            break;
          }
          if (dj < best) {
            best = dj;
            enter = j;
          }
        }
      }
      if (enter < 0) {
        res.iterations = iterations_;
        return true;
      }
      Eigen::VectorXd alpha = ftran(enter);
      int r = -1;
      double theta = std::numeric_limits<double>::infinity();
      double best_piv = 0.0;
      for (int i = 0; i < m_; ++i) {
        if (alpha(i) <= opt_.pivot_tol) continue;
        double ratio = std::max(xb_(i), 0.0) / alpha(i);
        bool better = false;
        if (ratio < theta - 1e-14) {
          better = true;
        } else if (ratio <= theta + 1e-14) {
          if (bland)
            better = basis_[i] < basis_[r];
          else
            better = alpha(i) > best_piv;
        }
        if (better) {
          theta = ratio;
          r = i;
          best_piv = alpha(i);
        }
      }
      if (r < 0) throw std::runtime_error("linear program is unbounded");
      if (theta <= 1e-14)
        ++degenerate_run;
      else
        degenerate_run = 0;
      xb_ -= theta * alpha;
      xb_(r) = theta;
      for (int i = 0; i < m_; ++i)
        if (xb_(i) < 0 && xb_(i) > -opt_.feas_tol) xb_(i) = 0.0;
      pivot(r, enter, alpha);
    }
  }

  void drive_out_artificials(LPResult& res) {
    for (int r = 0; r < m_; ++r) {
      if (basis_[r] < n_) continue;
      Eigen::RowVectorXd row = binv_.row(r);
      int best = -1;
      double bestv = 1e-7;
      for (int j = 0; j < n_; ++j) {
        if (is_basic_[j] >= 0) continue;
        double v = std::abs(col_dot(row.transpose(), j));
        if (v > bestv) {
          bestv = v;
          best = j;
        }
      }
      if (best < 0) {
        ++res.redundant_rows;
        continue;
      }
      Eigen::VectorXd alpha = ftran(best);
      double theta = xb_(r) / alpha(r);
      xb_ -= theta * alpha;
      xb_(r) = theta;
      pivot(r, best, alpha);
    }
    refactor();
  }

  void finalize(LPResult& res) {
    res.x.assign(n_, 0.0);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < n_) res.x[basis_[i]] = std::max(0.0, xb_(i));
    Eigen::VectorXd y = duals();
    res.y.resize(m_);
    for (int i = 0; i < m_; ++i) res.y[i] = y(i) * sign_[i];
    res.objective = 0.0;
    for (int j = 0; j < n_; ++j) res.objective += lp_.cost[j] * res.x[j];
    res.dual_objective = 0.0;
    for (int i = 0; i < m_; ++i) res.dual_objective += lp_.b[i] * res.y[i];
    res.iterations = iterations_;
    res.status = LPStatus::Optimal;
  }

  const LinearProgram& lp_;
  LPOptions opt_;
  int m_ = 0, n_ = 0;
  std::vector<double> sign_;
  Eigen::VectorXd b_;
  std::vector<int> basis_;
  std::vector<int> is_basic_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
  std::vector<double> phase_cost_;
  bool allow_artificial_entry_ = false;
  int iterations_ = 0;
  int since_refactor_ = 0;
};

}  // namespace

LPResult solve_lp(const LinearProgram& lp, const LPOptions& opt) {
  if (lp.num_rows == 0) {
    LPResult r;
    r.status = LPStatus::Optimal;
    r.x.assign(lp.columns.size(), 0.0);
    return r;
  }
  Simplex s(lp, opt);
  return s.run();
}

}  // namespace geoflow
