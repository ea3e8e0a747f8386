#include "geoflow/assignment.hpp"

#include <limits>
#include <stdexcept>

namespace geoflow {

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost, double* total) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("assignment: cost matrix must be square");
  if (!cost.allFinite()) throw std::invalid_argument("assignment: costs must be finite");
  const double inf = std::numeric_limits<double>::infinity();
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c = cost;
  // 1-based rows/cols, column 0 is the virtual start
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = inf;
      const double ui = u[i0];
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = c(i0 - 1, j - 1) - ui - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(n);
  for (int j = 1; j <= n; ++j) perm[p[j] - 1] = j - 1;
  if (total) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += cost(i, perm[i]);
    *total = s;
  }
  return perm;
}

}  // namespace geoflow
