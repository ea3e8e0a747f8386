#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "geoflow/assignment.hpp"

using namespace geoflow;

TEST_CASE("assignment matches exhaustive search") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 5.0);
  for (int n = 1; n <= 8; ++n)
    for (int t = 0; t < 5; ++t) {
      Eigen::MatrixXd c(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) c(i, j) = u(rng);
      double total = 0.0;
      auto p = solve_assignment(c, &total);
      std::vector<int> q(n);
      std::iota(q.begin(), q.end(), 0);
      double best = 1e300;
      do {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += c(i, q[i]);
        best = std::min(best, s);
      } while (std::next_permutation(q.begin(), q.end()));
      CHECK(total == doctest::Approx(best).epsilon(1e-12));
      std::vector<int> sorted = p;
      std::sort(sorted.begin(), sorted.end());
      for (int i = 0; i < n; ++i) CHECK(sorted[i] == i);
    }
}

TEST_CASE("assignment on squared distances of a shifted lattice") {
  // points x_i = i + 0.4 matched to centres j: optimal is the identity
  const int n = 200;
  Eigen::MatrixXd c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c(i, j) = (i + 0.4 - j) * (i + 0.4 - j);
  double total = 0.0;
  auto p = solve_assignment(c, &total);
  for (int i = 0; i < n; ++i) CHECK(p[i] == i);
  CHECK(total == doctest::Approx(n * 0.16));
}

TEST_CASE("assignment input checks") {
  CHECK_THROWS_AS(solve_assignment(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 2);
  c(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(solve_assignment(c), std::invalid_argument);
  CHECK(solve_assignment(Eigen::MatrixXd(0, 0)).empty());
}
