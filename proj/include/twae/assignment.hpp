#pragma once

#include <limits>
#include <vector>

#include "twae/common.hpp"

namespace twae {

struct AssignmentSolution {
  std::vector<std::size_t> row_to_col;  // permutation
  double cost = 0.0;                    // sum of cost(i, row_to_col[i]) in row order
};

/// Exact minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// shortest augmenting paths with dual potentials, O(n^3)).
inline AssignmentSolution solve_assignment(const RowMatrix& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  if (cost.cols() != cost.rows()) throw DimensionError("solve_assignment: cost matrix must be square");
  if (n == 0) return {};
  if (!cost.allFinite()) throw NumericalError("solve_assignment: non-finite cost");

  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
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
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  AssignmentSolution sol;
  sol.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) sol.row_to_col[p[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i)
    sol.cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(sol.row_to_col[i]));
  return sol;
}

}  // namespace twae
