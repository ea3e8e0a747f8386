#pragma once

#include <Eigen/Dense>
#include <vector>

namespace geoflow {

// Square linear assignment, min sum cost(i, perm[i]). Shortest augmenting paths with potentials, O(n^3).
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost, double* total = nullptr);

}  // namespace geoflow
