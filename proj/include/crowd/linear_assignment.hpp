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

#pragma once

#include <cstddef>
#include <vector>

#include "crowd/emd.hpp"

namespace crowd {

struct AssignmentResult {
  std::vector<std::size_t> row_to_col;
  double cost = 0.0;
};

// Kuhn-Munkres with potentials, O(n^3). Any optimal assignment.
AssignmentResult solve_assignment(const CostMatrix& costs);

// Optimal assignment, lexicographically smallest among those whose cost is
// within `tolerance` of the optimum.
AssignmentResult solve_assignment_lexicographic(const CostMatrix& costs,
                                                double tolerance = 1e-9);

}  // namespace crowd
