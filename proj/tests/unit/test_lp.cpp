#include <random>

#include "dense_lp.hpp"
#include "doctest.h"
#include "geoflow/lp.hpp"

using namespace geoflow;

namespace {

LinearProgram to_sparse(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                        const std::vector<double>& c) {
  LinearProgram lp;
  lp.num_rows = static_cast<int>(A.size());
  lp.b = b;
  lp.cost = c;
  for (size_t j = 0; j < c.size(); ++j) {
    SparseColumn col;
    for (size_t i = 0; i < A.size(); ++i)
      if (A[i][j] != 0.0) {
        col.rows.push_back(static_cast<int>(i));
        col.vals.push_back(A[i][j]);
      }
    lp.columns.push_back(col);
  }
  return lp;
}

}  // namespace

TEST_CASE("tiny lp by hand") {
  // min x1 + 2 x2  s.t.  x1 + x2 = 1
  auto lp = to_sparse({{1, 1}}, {1}, {1, 2});
  auto r = solve_lp(lp);
  REQUIRE(r.status == LPStatus::Optimal);
  CHECK(r.objective == doctest::Approx(1.0));
  CHECK(r.x[0] == doctest::Approx(1.0));
  CHECK(r.y[0] == doctest::Approx(1.0));
}

TEST_CASE("infeasible lp") {
  auto lp = to_sparse({{1, 1}, {1, 1}}, {1, 2}, {1, 1});
  CHECK(solve_lp(lp).status == LPStatus::Infeasible);
}

TEST_CASE("random transportation problems match the tableau oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    int m1 = 2 + static_cast<int>(rng() % 4), m2 = 2 + static_cast<int>(rng() % 4);
    std::vector<double> a(m1), bb(m2);
    double sa = 0, sb = 0;
    for (auto& v : a) sa += (v = u(rng) + 0.1);
    for (auto& v : bb) sb += (v = u(rng) + 0.1);
    // half the trials with equal masses to force degeneracy
    if (trial % 2) {
      for (auto& v : a) v = 1.0 / m1;
      for (auto& v : bb) v = 1.0 / m2;
      sa = sb = 1.0;
    }
    std::vector<std::vector<double>> A(m1 + m2, std::vector<double>(m1 * m2, 0.0));
    std::vector<double> b, c(m1 * m2);
    for (int i = 0; i < m1; ++i) b.push_back(a[i] / sa);
    for (int j = 0; j < m2; ++j) b.push_back(bb[j] / sb);
    for (int i = 0; i < m1; ++i)
      for (int j = 0; j < m2; ++j) {
        A[i][i * m2 + j] = 1;
        A[m1 + j][i * m2 + j] = 1;
        c[i * m2 + j] = std::floor(u(rng) * 4);  // integer costs, many ties
      }
    auto oracle = testutil::dense_lp_min(A, b, c);
    auto r = solve_lp(to_sparse(A, b, c));
    REQUIRE(r.status == LPStatus::Optimal);
    CHECK(r.objective == doctest::Approx(oracle.value).epsilon(1e-10));
    CHECK(r.dual_objective == doctest::Approx(r.objective).epsilon(1e-10));
    CHECK(r.redundant_rows >= 1);
    // dual feasibility
    for (int j = 0; j < m1 * m2; ++j) CHECK(r.y[j / m2] + r.y[m1 + j % m2] <= c[j] + 1e-9);
  }
}

TEST_CASE("negative right-hand sides") {
  // -x1 - x2 = -2, x1 - x2 = 0 -> x = (1, 1)
  auto lp = to_sparse({{-1, -1}, {1, -1}}, {-2, 0}, {3, 1});
  auto r = solve_lp(lp);
  REQUIRE(r.status == LPStatus::Optimal);
  CHECK(r.objective == doctest::Approx(4.0));
  CHECK(r.dual_objective == doctest::Approx(4.0));
}
