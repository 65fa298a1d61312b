#pragma once

// Capacitated assignment of N encoded points to m generators, n = N/m each:
// the least-cost-method greedy and an exact oracle for small N.

#include <limits>
#include <numeric>

#include "json.hpp"
#include "twae/assignment.hpp"
#include "twae/common.hpp"

namespace twae {

struct AssignmentPlan {
  std::vector<std::size_t> assignment;  // point index -> region index
  std::size_t capacity = 0;
  double cost = 0.0;

  /// Members of each region in increasing point order.
  std::vector<std::vector<std::size_t>> clusters(std::size_t region_count) const {
    std::vector<std::vector<std::size_t>> out(region_count);
    for (auto& c : out) c.reserve(capacity);
    for (std::size_t i = 0; i < assignment.size(); ++i) out.at(assignment[i]).push_back(i);
    return out;
  }
};

/// M(i, j) = |z_i - g_j|^2.
inline RowMatrix distance_matrix(const PointSet& z, const PointSet& g) {
  if (z.dim() != g.dim()) throw DimensionError("distance_matrix: dimension mismatch");
  if (g.empty() || z.size() % g.size() != 0)
    throw Error("distance_matrix: point count must be divisible by the generator count");
  RowMatrix m(static_cast<Eigen::Index>(z.size()), static_cast<Eigen::Index>(g.size()));
  parallel_for(z.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < g.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = squared_distance(z[i], g[j]);
  });
  return m;
}

inline double plan_cost(const PointSet& z, const PointSet& g, const std::vector<std::size_t>& assignment) {
  double c = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) c += squared_distance(z[i], g[assignment[i]]);
  return c;
}

/// Throws unless every region holds exactly `capacity` points.
inline void check_feasible(const AssignmentPlan& plan, std::size_t region_count) {
  std::vector<std::size_t> counts(region_count, 0);
  for (auto r : plan.assignment) {
    if (r >= region_count) throw Error("assignment plan: region index out of range");
    ++counts[r];
  }
  for (std::size_t j = 0; j < region_count; ++j)
    if (counts[j] != plan.capacity)
      throw Error("assignment plan: region " + std::to_string(j) + " holds " + std::to_string(counts[j]) +
                  " points, expected " + std::to_string(plan.capacity));
}

/// Least cost method: walk all N*m entries in ascending (value, i, j) order,
/// assigning a point to a region whenever the point is free and the region not full.
inline AssignmentPlan lcm_assign(const PointSet& z, const PointSet& g, std::size_t n) {
  const std::size_t m = g.size();
  if (n == 0 || z.size() != n * m) throw Error("lcm_assign: need N = n * m points");
  if (z.size() * m > std::numeric_limits<std::uint32_t>::max()) throw Error("lcm_assign: N * m too large");
  const RowMatrix dist = distance_matrix(z, g);
  const double* d = dist.data();

  // Row-major linear index k = i * m + j, so ordering by k breaks ties by (i, j).
  std::vector<std::uint32_t> order(z.size() * m);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [d](std::uint32_t a, std::uint32_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });

  AssignmentPlan plan;
  plan.capacity = n;
  plan.assignment.assign(z.size(), m);
  std::vector<std::size_t> fill(m, 0);
  std::size_t remaining = z.size();
  for (std::uint32_t k : order) {
    const std::size_t i = k / m, j = k % m;
    if (plan.assignment[i] != m || fill[j] == n) continue;
    plan.assignment[i] = j;
    ++fill[j];
    if (--remaining == 0) break;
  }
  for (std::size_t i = 0; i < z.size(); ++i) plan.cost += d[i * m + plan.assignment[i]];
  return plan;
}

inline constexpr std::size_t kOptimalAssignMaxPoints = 256;

/// Exact minimum-cost capacitated plan: each generator is repeated n times and
/// the resulting N x N assignment problem is solved exactly.
inline AssignmentPlan optimal_assign(const PointSet& z, const PointSet& g, std::size_t n) {
  const std::size_t m = g.size();
  if (n == 0 || z.size() != n * m) throw Error("optimal_assign: need N = n * m points");
  if (z.size() > kOptimalAssignMaxPoints) throw Error("optimal_assign: N exceeds 256");
  const RowMatrix dist = distance_matrix(z, g);
  RowMatrix cost(static_cast<Eigen::Index>(z.size()), static_cast<Eigen::Index>(z.size()));
  for (Eigen::Index c = 0; c < cost.cols(); ++c) cost.col(c) = dist.col(c / static_cast<Eigen::Index>(n));
  const auto sol = solve_assignment(cost);

  AssignmentPlan plan;
  plan.capacity = n;
  plan.assignment.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    plan.assignment[i] = sol.row_to_col[i] / n;
    plan.cost += dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(plan.assignment[i]));
  }
  return plan;
}

inline nlohmann::json to_json(const AssignmentPlan& p) {
  return {{"capacity", p.capacity}, {"assignment", p.assignment}, {"cost", p.cost}};
}

inline AssignmentPlan assignment_plan_from_json(const nlohmann::json& j) {
  AssignmentPlan p;
  p.capacity = j.at("capacity").get<std::size_t>();
  p.assignment = j.at("assignment").get<std::vector<std::size_t>>();
  p.cost = j.at("cost").get<double>();
  return p;
}

}  // namespace twae
