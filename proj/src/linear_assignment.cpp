/* Copyright 2026 The crowd-suppress Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "crowd/linear_assignment.hpp"

#include <cmath>
#include <limits>

#include "crowd/error.hpp"

namespace crowd {
namespace {

// Shortest augmenting path formulation with row/column potentials.
// Rows and columns are 1-based internally; index 0 is the virtual source.
AssignmentResult hungarian(const std::vector<double>& cost, std::size_t n) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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
  AssignmentResult result;
  result.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] != 0) result.row_to_col[p[j] - 1] = j - 1;
  }
  for (std::size_t r = 0; r < n; ++r) {
    result.cost += cost[r * n + result.row_to_col[r]];
  }
  return result;
}

std::vector<double> submatrix(const CostMatrix& costs,
                              const std::vector<std::size_t>& rows,
                              const std::vector<std::size_t>& cols) {
  std::vector<double> out;
  out.reserve(rows.size() * cols.size());
  for (std::size_t r : rows) {
    for (std::size_t c : cols) out.push_back(costs(r, c));
  }
  return out;
}

}  // namespace

AssignmentResult solve_assignment(const CostMatrix& costs) {
  for (double c : costs.data()) {
    if (!std::isfinite(c)) throw InvalidInput("cost matrix must be finite");
  }
  const std::vector<double> cost(costs.data().begin(), costs.data().end());
  return hungarian(cost, costs.size());
}

AssignmentResult solve_assignment_lexicographic(const CostMatrix& costs,
                                                double tolerance) {
  const std::size_t n = costs.size();
  const AssignmentResult optimum = solve_assignment(costs);
  const double slack = tolerance * (1.0 + std::abs(optimum.cost));

  // Fix rows in order, each to the smallest column that still admits an
  // optimal completion of the remaining rows.
  AssignmentResult result;
  result.row_to_col.assign(n, 0);
  std::vector<std::size_t> free_cols(n);
  for (std::size_t c = 0; c < n; ++c) free_cols[c] = c;
  double fixed = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<std::size_t> rest_rows;
    for (std::size_t rr = r + 1; rr < n; ++rr) rest_rows.push_back(rr);
    bool placed = false;
    for (std::size_t idx = 0; idx < free_cols.size(); ++idx) {
      const std::size_t c = free_cols[idx];
      std::vector<std::size_t> rest_cols = free_cols;
      rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(idx));
      double completion = 0.0;
      if (!rest_rows.empty()) {
        completion =
            hungarian(submatrix(costs, rest_rows, rest_cols), rest_rows.size())
                .cost;
      }
      if (fixed + costs(r, c) + completion <= optimum.cost + slack) {
        result.row_to_col[r] = c;
        fixed += costs(r, c);
        free_cols.erase(free_cols.begin() + static_cast<std::ptrdiff_t>(idx));
        placed = true;
        break;
      }
    }
    if (!placed) {
      // Unreachable for finite input; fall back to the unconstrained optimum.
      return optimum;
    }
  }
  result.cost = fixed;
  return result;
}

}  // namespace crowd
